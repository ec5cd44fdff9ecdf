use candle_core::DType;
use hitea::corpus::Vocab;
use hitea::gradcheck::{micro_batch, micro_config, micro_objective};
use hitea::model::HiteaModel;
use hitea::objectives::{total_loss, LossFlags, NegativeQueue, ObjectiveConfig};
use hitea::rng::rng_from;
use proptest::prelude::*;

fn micro_model(seed: u64) -> HiteaModel {
    HiteaModel::new(micro_config(&Vocab::default()), DType::F64, seed).unwrap()
}

#[test]
fn zeroed_language_heads_cost_log_vocab() {
    let vocab = Vocab::default();
    let model = micro_model(1);
    model.zero_output_heads().unwrap();
    let batch = micro_batch(&vocab, 2).unwrap();
    let log_v = (vocab.len() as f64).ln();
    for objective in ["mlm", "prefix_lm"] {
        let loss = micro_objective(&model, &batch, objective, 3)
            .unwrap()
            .to_scalar::<f64>()
            .unwrap();
        assert!((loss - log_v).abs() < 1e-12, "{objective}: {loss} vs {log_v}");
    }
}

#[test]
fn zeroed_matching_head_costs_log_two() {
    let vocab = Vocab::default();
    let model = micro_model(1);
    model.zero_vtm_head().unwrap();
    let batch = micro_batch(&vocab, 2).unwrap();
    let loss = micro_objective(&model, &batch, "vtm", 3)
        .unwrap()
        .to_scalar::<f64>()
        .unwrap();
    assert!((loss - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn queue_is_written_after_the_loss() {
    let vocab = Vocab::default();
    let model = micro_model(4);
    let batch = micro_batch(&vocab, 5).unwrap();
    let cfg = ObjectiveConfig {
        losses: LossFlags::RETRIEVAL,
        queue_capacity: 8,
        ..ObjectiveConfig::default()
    };
    let mut queue = NegativeQueue::new(8);
    let first = total_loss(&model, &batch, &cfg, &mut queue, &mut rng_from(0)).unwrap();
    assert_eq!(queue.owners().collect::<Vec<_>>(), vec!["m0", "m1"]);
    // The batch's own entries are excluded, so the loss is unchanged.
    let second = total_loss(&model, &batch, &cfg, &mut queue, &mut rng_from(0)).unwrap();
    assert_eq!(first.bundle.vtc, second.bundle.vtc);
    assert_eq!(queue.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn bundle_invariants_hold(model_seed in 0u64..1000, batch_seed in 0u64..1000, rng_seed in 0u64..1000) {
        let vocab = Vocab::default();
        let model = micro_model(model_seed);
        let batch = micro_batch(&vocab, batch_seed).unwrap();
        let cfg = ObjectiveConfig { k: 2, losses: LossFlags::ALL, ..ObjectiveConfig::default() };
        let mut queue = NegativeQueue::new(4);
        let b = total_loss(&model, &batch, &cfg, &mut queue, &mut rng_from(rng_seed)).unwrap().bundle;
        let sum = b.vtc + b.vtm + b.mlm + b.prefix_lm + b.cme + b.mtre;
        prop_assert!((b.total - sum).abs() <= 1e-12 * sum.abs().max(1.0));
        for v in [b.vtc, b.vtm, b.mlm, b.prefix_lm, b.cme] {
            prop_assert!(v >= 0.0);
        }
        prop_assert!((-1.0..=1.0).contains(&b.mtre));
    }
}
