use distemb::factorizations::{init_from_svd, Activation};
use distemb::linalg::gaussian_matrix;
use distemb::losses::recon_loss;
use distemb::trainer::{
    distill_finetune, fit_reconstruction, gen_corpus, pretrain_full, run_algorithm1, Arms, InitMode, ModelEmbedding,
    PipelineConfig, ToyTiedModel, TrainConfig,
};

fn config(steps: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        steps,
        seed,
        ..TrainConfig::default()
    }
}

#[test]
fn full_model_learns_below_uniform() {
    let c = gen_corpus(64, 2000, 4, 1.0, 11).unwrap();
    let p = pretrain_full(&c, 16, &config(2000, 11)).unwrap();
    let (first, last) = (p.ce_curve[0].1, p.ce_curve.last().unwrap().1);
    assert!(last <= first);
    assert!(last < 64f64.ln() - 0.5, "final CE {last}");
}

#[test]
fn exact_rank_target_is_recovered() {
    let a = gaussian_matrix(20, 3, 1, 1.0);
    let b = gaussian_matrix(8, 3, 2, 1.0);
    let e = a.matmul_t(&b).unwrap();
    let fit = fit_reconstruction(&e, 3, Activation::Identity, &config(50, 0)).unwrap();
    assert!(fit.final_loss <= 1e-6);
}

#[test]
fn step2_never_worsens_and_tracks_svd() {
    for seed in [5, 7, 11] {
        let e = gaussian_matrix(64, 16, seed, 1.0);
        let svd_loss = recon_loss(&init_from_svd(&e, 4, Activation::Identity).unwrap(), &e).unwrap();
        for init in [InitMode::Svd, InitMode::Random] {
            let cfg = TrainConfig {
                init,
                ..config(3000, seed)
            };
            let fit = fit_reconstruction(&e, 4, Activation::Relu, &cfg).unwrap();
            assert!(fit.final_loss <= fit.initial_loss);
            // ReLU rows lie in the cone spanned by V's columns, so the
            // funneling loss stays above the SVD loss at this rank.
            assert!(fit.final_loss >= svd_loss);
        }
    }
}

#[test]
fn distillation_lowers_recon_loss_against_no_distillation() {
    let c = gen_corpus(64, 2000, 4, 1.0, 5).unwrap();
    let p = pretrain_full(&c, 16, &config(2000, 5)).unwrap();
    let start = init_from_svd(&p.e, 4, Activation::Relu).unwrap();
    let model = ToyTiedModel::new(ModelEmbedding::LowRank(start), p.w.clone(), 4).unwrap();
    let with = distill_finetune(
        model.clone(),
        Some(&p.e),
        &c.examples,
        &TrainConfig {
            alpha: 0.01,
            ..config(2000, 5)
        },
    )
    .unwrap();
    let without = distill_finetune(
        model,
        Some(&p.e),
        &c.examples,
        &TrainConfig {
            alpha: 0.0,
            ..config(2000, 5)
        },
    )
    .unwrap();
    let r = |m: &ToyTiedModel| recon_loss(&m.emb, &p.e).unwrap();
    assert!(r(&with.model) < r(&without.model));
}

#[test]
fn near_full_rank_pipeline_matches_baseline_ce() {
    // Step 1 close to convergence, then a short low-rate Step 3, so any CE
    // gap reflects the compression rather than extra training.
    let c = gen_corpus(64, 20_000, 4, 1.0, 3).unwrap();
    let mut cfg = PipelineConfig::uniform(TrainConfig {
        learning_rate: 3e-3,
        ..config(3000, 3)
    });
    cfg.finetune = TrainConfig {
        learning_rate: 3e-4,
        ..config(1000, 3)
    };
    let out = run_algorithm1(&c, 16, 15, Activation::Identity, &cfg).unwrap();
    let step1 = out.pretrained.ce_curve.last().unwrap().1;
    let step3 = out.step3.curve.last().unwrap().1.ce;
    assert!((step3 - step1).abs() <= 0.02 * step1, "step1 {step1}, step3 {step3}");
}

#[test]
fn pipeline_is_deterministic_and_freezes_hold() {
    let c = gen_corpus(32, 600, 3, 1.0, 9).unwrap();
    let cfg = PipelineConfig {
        arms: Arms::all(),
        ..PipelineConfig::uniform(config(200, 9))
    };
    let a = run_algorithm1(&c, 8, 3, Activation::Relu, &cfg).unwrap();
    let b = run_algorithm1(&c, 8, 3, Activation::Relu, &cfg).unwrap();
    assert_eq!(a, b);
    let start = a.step2.embedding.clone();
    assert_eq!(a.arm("freeze_emb").unwrap().model.emb, ModelEmbedding::LowRank(start));
    assert_eq!(a.arm("freeze_non_emb").unwrap().model.w, a.pretrained.w);
    for (_, l) in &a.step3.curve {
        assert!((l.total - (l.alpha * l.recon + (1.0 - l.alpha) * l.ce)).abs() <= 1e-12);
    }
}
