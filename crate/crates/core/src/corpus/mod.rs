//! Synthetic moving-shapes video-text corpus.
//!
//! Clips are small grayscale frame stacks in which 3x3 shapes appear, move
//! or blink during declared time spans. Two splits are produced:
//!
//! * `temporal`: two moments back to back, captioned
//!   `"<attr> <shape> moves <dir> then <attr> <shape> moves <dir>"`. Clips
//!   come in sibling pairs holding the same two moments in opposite order, so
//!   both captions have the same bag of words and the frame sets are equal;
//!   only temporal order tells the siblings apart.
//! * `static`: a single moment covering the whole clip, either
//!   `"a <attr> <shape> is shown"` or `"<attr> <shape> blinks"`.

mod io;
mod vocab;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, stream};

pub use io::{corpus_fingerprint, read_dataset, write_dataset, DatasetHeader, SCHEMA_VERSION};
pub use vocab::{
    detokenize, tokenize, tokenize_ids, TokenizedText, Vocab, CLS, DEFAULT_CONTENT_WORDS, MASK, PAD, SEP,
    SPECIAL_TOKENS,
};

/// Parameters of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    pub num_videos: usize,
    /// Raw frames per clip before view sampling.
    pub frames_per_clip: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub channels: usize,
    #[serde(default)]
    pub vocab: Vocab,
    /// Fraction of clips placed in the temporal split (rounded down to whole pairs).
    pub temporal_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            num_videos: 1024,
            frames_per_clip: 64,
            frame_height: 16,
            frame_width: 16,
            channels: 1,
            vocab: Vocab::default(),
            temporal_fraction: 0.5,
            seed: 0,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_videos < 2 {
            return Err(Error::config("num_videos", "must be at least 2"));
        }
        if self.frames_per_clip < 2 {
            return Err(Error::config("frames_per_clip", "must be at least 2"));
        }
        if self.frame_height < 4 {
            return Err(Error::config("frame_height", "must be at least 4"));
        }
        if self.frame_width < 4 {
            return Err(Error::config("frame_width", "must be at least 4"));
        }
        if self.channels < 1 {
            return Err(Error::config("channels", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.temporal_fraction) {
            return Err(Error::config("temporal_fraction", "must lie in [0, 1]"));
        }
        for word in grammar_words() {
            if self.vocab.id(word).is_none() {
                return Err(Error::config("vocab", format!("caption grammar word {word:?} missing")));
            }
        }
        Ok(())
    }

    pub fn num_pairs(&self) -> usize {
        ((self.num_videos as f64 * self.temporal_fraction) / 2.0).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Square,
    Circle,
    Bar,
    Cross,
    Ring,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Square, Shape::Circle, Shape::Bar, Shape::Cross, Shape::Ring];

    pub fn word(self) -> &'static str {
        match self {
            Shape::Square => "square",
            Shape::Circle => "circle",
            Shape::Bar => "bar",
            Shape::Cross => "cross",
            Shape::Ring => "ring",
        }
    }

    /// Row-major 3x3 occupancy.
    fn stencil(self) -> [[bool; 3]; 3] {
        const X: bool = true;
        const O: bool = false;
        match self {
            Shape::Square => [[X, X, X], [X, X, X], [X, X, X]],
            Shape::Circle => [[O, X, O], [X, X, X], [O, X, O]],
            Shape::Bar => [[O, X, O], [O, X, O], [O, X, O]],
            Shape::Cross => [[X, O, X], [O, X, O], [X, O, X]],
            Shape::Ring => [[X, X, X], [X, O, X], [X, X, X]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Brightness {
    Bright,
    Dim,
}

impl Brightness {
    pub const ALL: [Brightness; 2] = [Brightness::Bright, Brightness::Dim];

    pub fn word(self) -> &'static str {
        match self {
            Brightness::Bright => "bright",
            Brightness::Dim => "dim",
        }
    }

    fn intensity(self) -> f32 {
        match self {
            Brightness::Bright => 1.0,
            Brightness::Dim => 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
    Up,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Left, Direction::Right, Direction::Up, Direction::Down];

    pub fn word(self) -> &'static str {
        match self {
            Direction::Left => "left",
            Direction::Right => "right",
            Direction::Up => "up",
            Direction::Down => "down",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Move(Direction),
    Blink,
    Show,
}

impl Action {
    pub fn phrase(self) -> String {
        match self {
            Action::Move(d) => format!("moves {}", d.word()),
            Action::Blink => "blinks".into(),
            Action::Show => "is shown".into(),
        }
    }

    pub fn parse(phrase: &str) -> Option<Action> {
        match phrase {
            "blinks" => Some(Action::Blink),
            "is shown" => Some(Action::Show),
            _ => {
                let dir = phrase.strip_prefix("moves ")?;
                Direction::ALL.into_iter().find(|d| d.word() == dir).map(Action::Move)
            }
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.phrase())
    }
}

impl Serialize for Action {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.phrase())
    }
}

impl<'de> Deserialize<'de> for Action {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Action::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown action {s:?}")))
    }
}

/// One atomic event: an actor performing an action during `[start, end)` raw frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Moment {
    pub attr: Brightness,
    pub shape: Shape,
    pub action: Action,
    pub start: usize,
    pub end: usize,
}

impl Moment {
    /// "<attr> <shape>", e.g. "dim ring".
    pub fn actor_phrase(&self) -> String {
        format!("{} {}", self.attr.word(), self.shape.word())
    }

    fn same_event(&self, other: &Moment) -> bool {
        self.attr == other.attr && self.shape == other.shape && self.action == other.action
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Temporal,
    Static,
}

/// Dense frame stack of shape `t x c x h x w`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frames {
    pub t: usize,
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl Frames {
    pub fn zeros(t: usize, c: usize, h: usize, w: usize) -> Frames {
        Frames {
            t,
            c,
            h,
            w,
            data: vec![0.0; t * c * h * w],
        }
    }

    pub fn frame_len(&self) -> usize {
        self.c * self.h * self.w
    }

    pub fn frame(&self, i: usize) -> &[f32] {
        let n = self.frame_len();
        &self.data[i * n..(i + 1) * n]
    }

    /// Gathers frames by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Frames {
        let mut data = Vec::with_capacity(indices.len() * self.frame_len());
        for &i in indices {
            data.extend_from_slice(self.frame(i));
        }
        Frames {
            t: indices.len(),
            c: self.c,
            h: self.h,
            w: self.w,
            data,
        }
    }

    fn set(&mut self, t: usize, y: usize, x: usize, v: f32) {
        for c in 0..self.c {
            let idx = ((t * self.c + c) * self.h + y) * self.w + x;
            if self.data[idx] < v {
                self.data[idx] = v;
            }
        }
    }
}

impl Serialize for Frames {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let nested: Vec<Vec<Vec<&[f32]>>> = (0..self.t)
            .map(|t| {
                (0..self.c)
                    .map(|c| {
                        (0..self.h)
                            .map(|y| {
                                let base = ((t * self.c + c) * self.h + y) * self.w;
                                &self.data[base..base + self.w]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        nested.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Frames {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let nested: Vec<Vec<Vec<Vec<f32>>>> = Vec::deserialize(d)?;
        let t = nested.len();
        let c = nested.first().map_or(0, Vec::len);
        let h = nested.first().and_then(|f| f.first()).map_or(0, Vec::len);
        let w = nested
            .first()
            .and_then(|f| f.first())
            .and_then(|p| p.first())
            .map_or(0, Vec::len);
        if t == 0 || c == 0 || h == 0 || w == 0 {
            return Err(D::Error::custom("frames must be a non-empty t x c x h x w array"));
        }
        let mut data = Vec::with_capacity(t * c * h * w);
        for frame in &nested {
            if frame.len() != c {
                return Err(D::Error::custom("ragged channel dimension"));
            }
            for plane in frame {
                if plane.len() != h {
                    return Err(D::Error::custom("ragged height dimension"));
                }
                for row in plane {
                    if row.len() != w {
                        return Err(D::Error::custom("ragged width dimension"));
                    }
                    data.extend_from_slice(row);
                }
            }
        }
        Ok(Frames { t, c, h, w, data })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoClip {
    pub id: String,
    pub split: Split,
    pub pair_id: Option<String>,
    pub caption: String,
    pub moments: Vec<Moment>,
    pub frames: Frames,
}

impl VideoClip {
    pub fn num_frames(&self) -> usize {
        self.frames.t
    }
}

/// Canonical caption for a moment list.
pub fn caption_from_moments(moments: &[Moment]) -> String {
    match moments {
        [m] if m.action == Action::Show => format!("a {} is shown", m.actor_phrase()),
        _ => moments
            .iter()
            .map(|m| format!("{} {}", m.actor_phrase(), m.action.phrase()))
            .collect::<Vec<_>>()
            .join(" then "),
    }
}

fn grammar_words() -> Vec<&'static str> {
    let mut words = vec!["a", "is", "shown", "then", "moves", "blinks"];
    words.extend(Shape::ALL.iter().map(|s| s.word()));
    words.extend(Brightness::ALL.iter().map(|b| b.word()));
    words.extend(Direction::ALL.iter().map(|d| d.word()));
    words
}

fn clip_id(index: usize) -> String {
    format!("clip-{index:05}")
}

/// Placement of one moment's actor, drawn once per moment and shared by siblings.
#[derive(Debug, Clone, Copy)]
struct Placement {
    x: usize,
    y: usize,
}

const STENCIL: usize = 3;
const MAX_TRAVEL: usize = 8;

fn travel(extent: usize) -> usize {
    MAX_TRAVEL.min(extent - STENCIL)
}

fn draw_placement(action: Action, h: usize, w: usize, rng: &mut rng::Rng) -> Placement {
    let (tx, ty) = (travel(w), travel(h));
    let free_x = w - STENCIL;
    let free_y = h - STENCIL;
    match action {
        Action::Move(Direction::Right) => Placement {
            x: rng.gen_range(0..=free_x - tx),
            y: rng.gen_range(0..=free_y),
        },
        Action::Move(Direction::Left) => Placement {
            x: rng.gen_range(tx..=free_x),
            y: rng.gen_range(0..=free_y),
        },
        Action::Move(Direction::Down) => Placement {
            x: rng.gen_range(0..=free_x),
            y: rng.gen_range(0..=free_y - ty),
        },
        Action::Move(Direction::Up) => Placement {
            x: rng.gen_range(0..=free_x),
            y: rng.gen_range(ty..=free_y),
        },
        Action::Blink | Action::Show => Placement {
            x: rng.gen_range(0..=free_x),
            y: rng.gen_range(0..=free_y),
        },
    }
}

fn render_moment(frames: &mut Frames, m: &Moment, p: Placement) {
    let len = m.end - m.start;
    let stencil = m.shape.stencil();
    let value = m.attr.intensity();
    for t in m.start..m.end {
        let r = t - m.start;
        let progress = |dist: usize| -> usize {
            if len < 2 {
                0
            } else {
                ((dist * r) as f64 / (len - 1) as f64).round() as usize
            }
        };
        let (x, y) = match m.action {
            Action::Move(Direction::Right) => (p.x + progress(travel(frames.w)), p.y),
            Action::Move(Direction::Left) => (p.x - progress(travel(frames.w)), p.y),
            Action::Move(Direction::Down) => (p.x, p.y + progress(travel(frames.h))),
            Action::Move(Direction::Up) => (p.x, p.y - progress(travel(frames.h))),
            Action::Blink => {
                if (r / 4) % 2 == 1 {
                    continue;
                }
                (p.x, p.y)
            }
            Action::Show => (p.x, p.y),
        };
        for (dy, row) in stencil.iter().enumerate() {
            for (dx, &on) in row.iter().enumerate() {
                if on {
                    frames.set(t, y + dy, x + dx, value);
                }
            }
        }
    }
}

fn moving_moments() -> Vec<(Brightness, Shape, Direction)> {
    let mut out = Vec::new();
    for attr in Brightness::ALL {
        for shape in Shape::ALL {
            for dir in Direction::ALL {
                out.push((attr, shape, dir));
            }
        }
    }
    out
}

/// Generates the corpus described by `spec`.
///
/// Temporal sibling pairs come first (clip `2p` and `2p + 1`), followed by
/// static clips. Distinct unordered moment pairs are used before any pair
/// repeats, so temporal captions are unique while the pool lasts. Every clip
/// renders from its own sub-seed, so the output is a pure function of `spec`.
pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<VideoClip>> {
    spec.validate()?;
    let t_raw = spec.frames_per_clip;
    let (h, w, c) = (spec.frame_height, spec.frame_width, spec.channels);
    let n_pairs = spec.num_pairs();

    let moments = moving_moments();
    let mut pool: Vec<(usize, usize)> = Vec::new();
    for i in 0..moments.len() {
        for j in i + 1..moments.len() {
            pool.push((i, j));
        }
    }
    let mut layout_rng = rng::derived_rng(spec.seed, stream::CORPUS_LAYOUT, 0);
    let mut chosen = Vec::with_capacity(n_pairs);
    while chosen.len() < n_pairs {
        let mut round = pool.clone();
        round.shuffle(&mut layout_rng);
        for (i, j) in round.into_iter().take(n_pairs - chosen.len()) {
            let flip = layout_rng.gen_bool(0.5);
            chosen.push(if flip { (j, i) } else { (i, j) });
        }
    }

    let half = t_raw / 2;
    let mut clips = Vec::with_capacity(spec.num_videos);
    for (p, &(a, b)) in chosen.iter().enumerate() {
        let mut clip_rng = rng::derived_rng(spec.seed, stream::CORPUS_CLIP, (2 * p) as u64);
        let events = [moments[a], moments[b]];
        let placements: Vec<Placement> = events
            .iter()
            .map(|&(_, _, d)| draw_placement(Action::Move(d), h, w, &mut clip_rng))
            .collect();
        for order in [[0usize, 1usize], [1, 0]] {
            let index = clips.len();
            let mut frames = Frames::zeros(t_raw, c, h, w);
            let mut ms = Vec::with_capacity(2);
            for (slot, &e) in order.iter().enumerate() {
                let (attr, shape, dir) = events[e];
                let (start, end) = if slot == 0 { (0, half) } else { (half, t_raw) };
                let m = Moment {
                    attr,
                    shape,
                    action: Action::Move(dir),
                    start,
                    end,
                };
                render_moment(&mut frames, &m, placements[e]);
                ms.push(m);
            }
            let sibling = if order[0] == 0 { index + 1 } else { index - 1 };
            clips.push(VideoClip {
                id: clip_id(index),
                split: Split::Temporal,
                pair_id: Some(clip_id(sibling)),
                caption: caption_from_moments(&ms),
                moments: ms,
                frames,
            });
        }
    }

    for index in clips.len()..spec.num_videos {
        let mut clip_rng = rng::derived_rng(spec.seed, stream::CORPUS_CLIP, index as u64);
        let action = if clip_rng.gen_bool(0.5) {
            Action::Show
        } else {
            Action::Blink
        };
        let attr = *Brightness::ALL.choose(&mut clip_rng).expect("non-empty");
        let shape = *Shape::ALL.choose(&mut clip_rng).expect("non-empty");
        let m = Moment {
            attr,
            shape,
            action,
            start: 0,
            end: t_raw,
        };
        let placement = draw_placement(action, h, w, &mut clip_rng);
        let mut frames = Frames::zeros(t_raw, c, h, w);
        render_moment(&mut frames, &m, placement);
        clips.push(VideoClip {
            id: clip_id(index),
            split: Split::Static,
            pair_id: None,
            caption: caption_from_moments(&[m]),
            moments: vec![m],
            frames,
        });
    }
    Ok(clips)
}

/// Checks the structural invariants of a clip list (sibling structure,
/// caption grammar, value range). Used after reading a dataset.
pub fn validate_clips(clips: &[VideoClip]) -> Result<()> {
    for (i, clip) in clips.iter().enumerate() {
        if clip.frames.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Invalid {
                record: i,
                field: "frames".into(),
                reason: "values must lie in [0, 1]".into(),
            });
        }
        if clip.moments.is_empty() {
            return Err(Error::Invalid {
                record: i,
                field: "moments".into(),
                reason: "at least one moment required".into(),
            });
        }
        if caption_from_moments(&clip.moments) != clip.caption {
            return Err(Error::Invalid {
                record: i,
                field: "caption".into(),
                reason: "caption does not match its moments".into(),
            });
        }
        for m in &clip.moments {
            if m.start >= m.end || m.end > clip.frames.t {
                return Err(Error::Invalid {
                    record: i,
                    field: "moments".into(),
                    reason: format!("span [{}, {}) outside the clip", m.start, m.end),
                });
            }
        }
        match (clip.split, &clip.pair_id) {
            (Split::Static, Some(_)) => {
                return Err(Error::Invalid {
                    record: i,
                    field: "pair_id".into(),
                    reason: "static clips have no sibling".into(),
                })
            }
            (Split::Temporal, None) => {
                return Err(Error::Invalid {
                    record: i,
                    field: "pair_id".into(),
                    reason: "temporal clips need a sibling".into(),
                })
            }
            (Split::Temporal, Some(pid)) => {
                let sib = clips.iter().find(|c| &c.id == pid).ok_or_else(|| Error::Invalid {
                    record: i,
                    field: "pair_id".into(),
                    reason: format!("sibling {pid} not found"),
                })?;
                let reversed = sib.moments.len() == clip.moments.len()
                    && sib
                        .moments
                        .iter()
                        .rev()
                        .zip(&clip.moments)
                        .all(|(a, b)| a.same_event(b));
                if !reversed || sib.caption == clip.caption {
                    return Err(Error::Invalid {
                        record: i,
                        field: "pair_id".into(),
                        reason: "sibling must hold the reversed moments with a different caption".into(),
                    });
                }
            }
            (Split::Static, None) => {}
        }
    }
    Ok(())
}

/// Clips of one split, in corpus order.
pub fn split_of(clips: &[VideoClip], split: Split) -> Vec<VideoClip> {
    clips.iter().filter(|c| c.split == split).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(num_videos: usize, temporal_fraction: f64, seed: u64) -> CorpusSpec {
        CorpusSpec {
            num_videos,
            temporal_fraction,
            seed,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let spec = small(24, 0.5, 7);
        assert_eq!(generate_corpus(&spec).unwrap(), generate_corpus(&spec).unwrap());
        assert_ne!(
            generate_corpus(&spec).unwrap(),
            generate_corpus(&small(24, 0.5, 8)).unwrap()
        );
    }

    #[test]
    fn zero_temporal_fraction_is_all_static() {
        let clips = generate_corpus(&small(10, 0.0, 3)).unwrap();
        assert!(clips.iter().all(|c| c.split == Split::Static && c.pair_id.is_none()));
    }

    #[test]
    fn pair_counts_match_enumeration() {
        let clips = generate_corpus(&small(512, 0.5, 1)).unwrap();
        let temporal: Vec<_> = clips.iter().filter(|c| c.split == Split::Temporal).collect();
        assert_eq!(temporal.len(), 256);
        let mut pairs = std::collections::BTreeSet::new();
        for c in &temporal {
            let pid = c.pair_id.clone().unwrap();
            let key = if c.id < pid {
                (c.id.clone(), pid)
            } else {
                (pid, c.id.clone())
            };
            pairs.insert(key);
        }
        assert_eq!(pairs.len(), 128);
    }

    #[test]
    fn siblings_are_time_reversals() {
        let clips = generate_corpus(&small(16, 1.0, 11)).unwrap();
        validate_clips(&clips).unwrap();
        for pair in clips.chunks(2) {
            let (a, b) = (&pair[0], &pair[1]);
            assert_ne!(a.caption, b.caption);
            assert_ne!(a.frames, b.frames);
            let mut wa: Vec<_> = a.caption.split(' ').collect();
            let mut wb: Vec<_> = b.caption.split(' ').collect();
            wa.sort();
            wb.sort();
            assert_eq!(wa, wb);
            let mut fa: Vec<&[f32]> = (0..a.frames.t).map(|i| a.frames.frame(i)).collect();
            let mut fb: Vec<&[f32]> = (0..b.frames.t).map(|i| b.frames.frame(i)).collect();
            let cmp = |x: &&[f32], y: &&[f32]| x.partial_cmp(y).unwrap();
            fa.sort_by(cmp);
            fb.sort_by(cmp);
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn temporal_captions_unique_while_pool_lasts() {
        let clips = generate_corpus(&small(512, 1.0, 5)).unwrap();
        let set: std::collections::BTreeSet<_> = clips.iter().map(|c| c.caption.clone()).collect();
        assert_eq!(set.len(), clips.len());
    }

    #[test]
    fn frames_render_declared_spans() {
        let clips = generate_corpus(&small(8, 0.5, 2)).unwrap();
        for clip in &clips {
            for t in 0..clip.frames.t {
                let active = clip.moments.iter().any(|m| {
                    (m.start..m.end).contains(&t) && !(m.action == Action::Blink && ((t - m.start) / 4) % 2 == 1)
                });
                let lit = clip.frames.frame(t).iter().any(|&v| v > 0.0);
                assert_eq!(active, lit, "clip {} frame {t}", clip.id);
            }
        }
    }

    #[test]
    fn invalid_spec_names_field() {
        let err = generate_corpus(&small(1, 0.5, 0)).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "num_videos"));
        let err = generate_corpus(&small(8, 1.5, 0)).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "temporal_fraction"));
    }

    #[test]
    fn captions_round_trip_through_tokenizer() {
        let spec = small(64, 0.5, 9);
        for clip in generate_corpus(&spec).unwrap() {
            let t = tokenize(&clip.caption, &spec.vocab).unwrap();
            assert_eq!(t.content_mask.iter().filter(|&&m| m).count(), t.n());
            assert!(t.n() >= 1);
            assert_eq!(detokenize(&t, &spec.vocab), clip.caption);
        }
    }
}
