use mia_core::game::{roc, roc_gap, GameConfig, GameSummary, Sampling};
use mia_core::theory::theoretical_leakage;
use mia_core::whitebox::WhiteboxConfig;

fn config(score: &str, mechanism: &str) -> GameConfig {
    serde_json::from_str(&format!(
        r#"{{
            "distribution": {{"law": "bernoulli_uniform", "d": 400, "a": 0.25, "seed": 17}},
            "mechanism": {mechanism},
            "n": 100,
            "target": {{"kind": "easy"}},
            "score": {score},
            "extra_scores": [{{"name": "scalar_product"}}],
            "rounds": 600,
            "master_seed": 4
        }}"#
    ))
    .unwrap()
}

#[test]
fn json_config_round_trips() {
    let cfg = config(r#"{"name": "lr_noisy"}"#, r#"{"mechanism": "noisy_mean", "gamma_scalar": 0.5}"#);
    assert_eq!(cfg.sampling, Sampling::Summary);
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(serde_json::from_str::<GameConfig>(&text).unwrap(), cfg);
}

#[test]
fn unknown_fields_are_rejected() {
    let err = serde_json::from_str::<GameConfig>(r#"{"n": 3, "bogus": 1}"#).unwrap_err();
    assert!(err.to_string().contains("bogus"), "{err}");
}

#[test]
fn simulated_games_follow_theory() {
    for (score, mech) in [
        (r#"{"name": "lr_asymptotic"}"#, r#"{"mechanism": "empirical_mean"}"#),
        (r#"{"name": "lr_exact_bernoulli"}"#, r#"{"mechanism": "empirical_mean"}"#),
        (r#"{"name": "lr_noisy"}"#, r#"{"mechanism": "noisy_mean", "gamma_scalar": 1.0}"#),
    ] {
        let game = config(score, mech).build().unwrap();
        let rounds = game.run().unwrap();
        let (summary, curve) = GameSummary::new(&game, 0, &rounds[0]).unwrap();
        assert_eq!(summary.theory_leakage, theoretical_leakage(summary.m_eff));
        // 600 rounds: loose band around the optimal curve.
        assert!(roc_gap(&curve, summary.m_eff).unwrap() < 0.1, "{score}: {summary:?}");
        let scalar = roc(&rounds[1]).unwrap();
        assert!(curve.auc >= scalar.auc - 0.03, "{score}: {} vs {}", curve.auc, scalar.auc);
    }
}

#[test]
fn whitebox_defaults_from_minimal_json() {
    let cfg: WhiteboxConfig = serde_json::from_str(r#"{"master_seed": 1}"#).unwrap();
    assert_eq!((cfg.features, cfg.classes, cfg.batch_size), (10, 2, 64));
    assert_eq!(cfg.eta, 1e-3);
    assert!(serde_json::from_str::<WhiteboxConfig>("{}").is_err());
}
