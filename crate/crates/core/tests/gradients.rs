use candle_core::DType;
use hitea::corpus::Vocab;
use hitea::gradcheck::{
    check_gradients, check_gradients_split, micro_batch, micro_config, micro_mtre_frozen, micro_mtre_targets,
    micro_objective,
};
use hitea::model::HiteaModel;

fn check(objective: &str) {
    let vocab = Vocab::default();
    let model = HiteaModel::new(micro_config(&vocab), DType::F64, 5).unwrap();
    let batch = micro_batch(&vocab, 9).unwrap();
    let report = check_gradients(&model, |m| micro_objective(m, &batch, objective, 13), 3, 1e-5, 21).unwrap();
    assert!(report.nonzero > 0, "{objective}: no gradient reached the parameters");
    assert!(report.max_rel_error <= 1e-4, "{objective}: {report:?}");
}

#[test]
fn cme_gradient_matches_finite_differences() {
    check("cme");
}

#[test]
fn mtre_gradient_matches_finite_differences_with_frozen_targets() {
    let vocab = Vocab::default();
    let model = HiteaModel::new(micro_config(&vocab), DType::F64, 5).unwrap();
    let batch = micro_batch(&vocab, 9).unwrap();
    let targets = micro_mtre_targets(&model, &batch).unwrap();
    let full = micro_objective(&model, &batch, "mtre", 13)
        .unwrap()
        .to_scalar::<f64>()
        .unwrap();
    let frozen = micro_mtre_frozen(&model, &batch, &targets)
        .unwrap()
        .to_scalar::<f64>()
        .unwrap();
    assert!((full - frozen).abs() < 1e-12, "{full} vs {frozen}");
    let report = check_gradients_split(
        &model,
        |m| micro_objective(m, &batch, "mtre", 13),
        |m| micro_mtre_frozen(m, &batch, &targets),
        3,
        1e-5,
        21,
    )
    .unwrap();
    assert!(report.nonzero > 0);
    assert!(report.max_rel_error <= 1e-4, "{report:?}");
}

#[test]
fn vtc_gradient_matches_finite_differences() {
    check("vtc");
}

#[test]
fn vtm_gradient_matches_finite_differences() {
    check("vtm");
}

#[test]
fn mlm_gradient_matches_finite_differences() {
    check("mlm");
}

#[test]
fn prefix_lm_gradient_matches_finite_differences() {
    check("prefix_lm");
}
