use super::*;
use crate::sensors::DataSource;
use rand::Rng;

fn deployment(channels: usize) -> Deployment {
    Deployment {
        sources: vec![DataSource::new("Hips", "acc", channels), DataSource::new("Bag", "gyro", channels)],
        sampling_rate: 50.0,
    }
}

fn frame(id: u64, label: Option<usize>, samples: Vec<Vec<f64>>) -> Frame {
    Frame {
        frame_id: id,
        recording: 0,
        time_index: id as usize,
        label,
        samples,
        gap_fraction: 0.0,
    }
}

/// Two classes separated by the mean of channel 0.
fn toy(n: usize, window: usize, seed_value: u64) -> Vec<Frame> {
    let mut rng = seed::rng(seed_value);
    (0..n)
        .map(|i| {
            let y = i % 2;
            let shift = if y == 0 { 1.0 } else { -1.0 };
            let samples = (0..4)
                .map(|c| {
                    (0..window)
                        .map(|_| rng.gen_range(-0.5..0.5) + if c == 0 { shift } else { 0.0 })
                        .collect()
                })
                .collect();
            frame(i as u64, Some(y), samples)
        })
        .collect()
}

fn labels2() -> Vec<String> {
    vec!["a".into(), "b".into()]
}

#[test]
fn structural_modes() {
    let dep = Deployment::grid(&["Hips", "Hand"], &["acc"], 3, 50.0);
    let cfg = ModelConfig {
        conv_mode: ConvMode::SplitChannels,
        n_conv_blocks: 1,
        kernel_sizes: [5, 5, 5],
        n_filters: 4,
        ..Default::default()
    };
    let net = Network::new(&cfg, &dep, 40, 3).unwrap();
    assert_eq!(net.manifest.iter().filter(|l| l.name.ends_with("conv1.weight")).count(), 6);
    // stride round(0.5 * 5) = 3: (40 - 5) / 3 + 1 = 12, pooled 6
    assert_eq!(net.feat_dim, 6 * 4 * 6);

    let stats = Network::new(&ModelConfig { n_conv_blocks: 0, ..cfg.clone() }, &dep, 40, 3).unwrap();
    assert_eq!(stats.feat_dim, 18);

    let grouped = Network::new(&ModelConfig { conv_mode: ConvMode::GroupedModalities, ..cfg.clone() }, &dep, 40, 3).unwrap();
    let split = Network::new(&ModelConfig { conv_mode: ConvMode::SplitModalities, ..cfg.clone() }, &dep, 40, 3).unwrap();
    assert_eq!(grouped.manifest[0].shape, vec![4, 6, 5]);
    assert_eq!(split.manifest[0].shape, vec![4, 3, 5]);
    assert_ne!(grouped.manifest, split.manifest);
}

#[test]
fn config_errors() {
    let dep = deployment(1);
    let big = ModelConfig {
        kernel_sizes: [50, 9, 9],
        ..Default::default()
    };
    assert!(matches!(Network::new(&big, &dep, 40, 2), Err(LearnerError::KernelTooLarge { .. })));
    let hybrid = ModelConfig {
        head: Head::Hybrid,
        ..Default::default()
    };
    assert!(hybrid.validate().is_err());
}

#[test]
fn table1_configuration_maps() {
    let space = crate::hyperspace::table1_space();
    let c = crate::hyperspace::sample(&space, 3);
    let cfg = ModelConfig::default().with_configuration(&c).unwrap();
    assert_eq!(cfg.learning_rate, c.number("lr").unwrap());
    assert_eq!(cfg.n_filters, c.number("n_f").unwrap() as usize);
    assert_eq!(cfg.n_hu1, c.number("n_hu1"));
    let sw = crate::hyperspace::source_switch_space(vec![], &["Hips-acc", "Bag-gyro"]).unwrap();
    let mut on = crate::hyperspace::sample(&sw, 1);
    on.values.insert("use.Bag-gyro".into(), ParamValue::Choice("off".into()));
    let cfg = ModelConfig::default().with_configuration(&on).unwrap();
    assert!(cfg.disabled_sources.contains("Bag-gyro"));
}

#[test]
fn separable_toy_reaches_full_accuracy() {
    let frames = toy(40, 16, 1);
    let idx: Vec<usize> = (0..frames.len()).collect();
    for head in [Head::SoftmaxLinear, Head::Mlp] {
        let cfg = ModelConfig {
            n_conv_blocks: 0,
            epochs: 200,
            dropout: 0.0,
            head,
            dense_units: 8,
            ..Default::default()
        };
        let m = fit(&cfg, &deployment(2), &labels2(), &frames, &idx, None, 4).unwrap();
        let metrics = evaluate(&m, &frames, &idx, false);
        assert_eq!(metrics.accuracy, 1.0, "{head:?}");
        assert!(m.loss_trace.last().unwrap() < &m.loss_trace[0]);
    }
}

#[test]
fn conv_toy_learns() {
    let frames = toy(40, 64, 2);
    let idx: Vec<usize> = (0..frames.len()).collect();
    let cfg = ModelConfig {
        n_conv_blocks: 2,
        kernel_sizes: [5, 3, 3],
        n_filters: 4,
        epochs: 60,
        learning_rate: 0.01,
        ..Default::default()
    };
    let m = fit(&cfg, &deployment(2), &labels2(), &frames, &idx, None, 4).unwrap();
    assert_eq!(evaluate(&m, &frames, &idx, false).accuracy, 1.0);
}

#[test]
fn large_learning_rate_never_silently_nan() {
    let frames = toy(40, 16, 3);
    let idx: Vec<usize> = (0..frames.len()).collect();
    let cfg = ModelConfig {
        n_conv_blocks: 1,
        kernel_sizes: [5, 5, 5],
        learning_rate: 0.1,
        epochs: 50,
        ..Default::default()
    };
    match fit(&cfg, &deployment(2), &labels2(), &frames, &idx, None, 1) {
        Ok(m) => assert!(m.params.iter().all(|p| p.is_finite())),
        Err(e) => assert!(matches!(e, LearnerError::Diverged { .. })),
    }
}

#[test]
fn zero_epochs_keeps_initialization() {
    let frames = toy(10, 16, 4);
    let cfg = ModelConfig {
        epochs: 0,
        kernel_sizes: [5, 5, 5],
        ..Default::default()
    };
    let model = build(&cfg, &deployment(2), 16, 2, 9).unwrap();
    let enc = InputEncoder::fit(EncoderKind::Raw, &frames.iter().collect::<Vec<_>>(), Vec::new());
    let set: Vec<Example> = frames
        .iter()
        .map(|f| Example {
            input: enc.encode(f),
            label: class_of(f, 2),
        })
        .collect();
    let t = train(&model, &[set]).unwrap();
    assert_eq!(t.params, model.params);
    assert!(t.loss_trace.is_empty());
}

#[test]
fn missing_activity_rejected() {
    let frames = toy(10, 16, 4);
    let idx: Vec<usize> = (0..10).step_by(2).collect();
    let e = fit(&ModelConfig::default(), &deployment(2), &labels2(), &frames, &idx, None, 0).unwrap_err();
    assert_eq!(e, LearnerError::MissingActivity("b".into()));
}

#[test]
fn macro_f1_hand_example() {
    let m = Metrics::from_confusion(labels2(), vec![vec![3, 2], vec![1, 4]], None, true);
    let want = (2.0 / 3.0 + 8.0 / 11.0) / 2.0;
    assert!((m.macro_f1 - want).abs() < 1e-15);
    assert!((m.macro_f1 - 0.697).abs() < 1e-3);
    assert_eq!(m.per_activity_nu, vec![1.0 - 3.0 / 5.0, 1.0 - 4.0 / 5.0]);
}

#[test]
fn perfect_and_constant_predictors() {
    let m = Metrics::from_confusion(labels2(), vec![vec![5, 0], vec![0, 5]], None, true);
    assert_eq!((m.macro_f1, m.nu), (1.0, 0.0));
    let c = Metrics::from_confusion(labels2(), vec![vec![5, 0], vec![5, 0]], None, true);
    assert_eq!(c.nu, 0.5);
    assert_eq!(c.accuracy + c.nu, 1.0);
}

#[test]
fn null_class_handling() {
    let classes = vec!["a".to_string(), "b".to_string(), "null".to_string()];
    let conf = vec![vec![4, 0, 1], vec![0, 5, 0], vec![3, 0, 2]];
    let without = Metrics::from_confusion(classes.clone(), conf.clone(), Some(2), false);
    // null rows dropped: a has tp 4, fn 1, fp 0; b perfect
    assert!((without.macro_f1 - (8.0 / 9.0 + 1.0) / 2.0).abs() < 1e-15);
    assert!((without.nu - 0.1).abs() < 1e-15);
    let with = Metrics::from_confusion(classes, conf, Some(2), true);
    assert_eq!(with.per_activity_nu.len(), 2);
    assert!(with.macro_f1 < without.macro_f1);
    let rows: Vec<u64> = with.confusion.iter().map(|r| r.iter().sum()).collect();
    assert_eq!(rows, vec![5, 5, 5]);
}

#[test]
fn masking_rules() {
    let dep = deployment(2);
    let frames = toy(6, 8, 5);
    let refs: Vec<&Frame> = frames.iter().collect();
    let acts = labels2();
    let all: Subsets = [("a".to_string(), ["Hips-acc".to_string(), "Bag-gyro".to_string()].into())].into();
    let same = mask_augment(&refs, &dep, &acts, &all, &MaskNoise::Scalar(1.0), false, 1).unwrap();
    assert_eq!(same, frames);

    let hips: Subsets = [("a".to_string(), ["Hips-acc".to_string()].into())].into();
    let zeroed = mask_augment(&refs, &dep, &acts, &hips, &MaskNoise::Scalar(0.0), false, 1).unwrap();
    for (f, g) in frames.iter().zip(&zeroed) {
        if f.label == Some(0) {
            assert_eq!(f.samples[..2], g.samples[..2]);
            assert!(g.samples[2..].iter().flatten().all(|&v| v == 0.0));
        } else {
            assert_eq!(f, g);
        }
    }

    let empty: Subsets = [("a".to_string(), BTreeSet::new())].into();
    let kept = mask_augment(&refs, &dep, &acts, &empty, &MaskNoise::Scalar(1.0), true, 1).unwrap();
    assert_eq!(kept, frames);
    let gone = mask_augment(&refs, &dep, &acts, &empty, &MaskNoise::Scalar(1.0), false, 1).unwrap();
    assert!(gone.iter().zip(&frames).filter(|(_, f)| f.label == Some(0)).all(|(g, f)| g.samples.iter().zip(&f.samples).all(|(a, b)| a != b)));

    let bad: Subsets = [("a".to_string(), ["Nope".to_string()].into())].into();
    assert_eq!(
        mask_augment(&refs, &dep, &acts, &bad, &MaskNoise::Scalar(1.0), false, 1),
        Err(LearnerError::UnknownSource("Nope".into()))
    );
}

#[test]
fn softmax_normalizes() {
    let p = softmax(&[1000.0, -5.0, 3.0, 999.5]);
    assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

fn finite_difference_check(cfg: &ModelConfig, window: usize) {
    let dep = deployment(1);
    let net = Network::new(cfg, &dep, window, 3).unwrap();
    let mut rng = seed::rng(77);
    let inputs: Vec<Vec<f64>> = (0..3).map(|_| (0..net.input_len).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let labels = vec![0, 2, 1];
    for point in 0..10 {
        let p: Vec<f64> = (0..net.n_params).map(|_| rng.gen_range(-0.8..0.8)).collect();
        let (_, g) = net.loss_and_grad(&p, &inputs, &labels);
        let h = 1e-5;
        let mut num = vec![0.0; p.len()];
        for i in 0..p.len() {
            let mut a = p.clone();
            a[i] += h;
            let mut b = p.clone();
            b[i] -= h;
            num[i] = (net.loss_and_grad(&a, &inputs, &labels).0 - net.loss_and_grad(&b, &inputs, &labels).0) / (2.0 * h);
        }
        let diff: f64 = g.iter().zip(&num).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let scale = g.iter().map(|x| x * x).sum::<f64>().sqrt().max(num.iter().map(|x| x * x).sum::<f64>().sqrt());
        assert!(diff / scale <= 1e-4, "point {point}: relative error {}", diff / scale);
    }
}

#[test]
fn gradient_check_head() {
    let cfg = ModelConfig {
        n_conv_blocks: 0,
        head: Head::Mlp,
        dense_units: 5,
        activation: Activation::Tanh,
        dropout: 0.0,
        ..Default::default()
    };
    finite_difference_check(&cfg, 8);
}

#[test]
fn gradient_check_conv_block() {
    let cfg = ModelConfig {
        n_conv_blocks: 1,
        kernel_sizes: [3, 3, 3],
        n_filters: 2,
        stride_fraction: 0.34,
        activation: Activation::Tanh,
        dropout: 0.0,
        ..Default::default()
    };
    finite_difference_check(&cfg, 12);
}

#[test]
fn protocol_modes() {
    let dep = deployment(2);
    let frames = toy(40, 16, 6);
    let folds = crate::sensors::meta_segment_partition(&frames, 4, 1, 2).unwrap();
    let cfg = ModelConfig {
        n_conv_blocks: 0,
        epochs: 20,
        ..Default::default()
    };
    let opts = ProtocolOptions::default();
    let wo = run_protocol(&dep, &labels2(), &frames, &folds, &cfg, ProtocolMode::WoDgp, None, &opts, 3).unwrap();
    assert_eq!(wo.per_fold.len(), 4);
    assert!(matches!(
        run_protocol(&dep, &labels2(), &frames, &folds, &cfg, ProtocolMode::WDgp, None, &opts, 3),
        Err(LearnerError::MissingDgp(_))
    ));
    let all: Subsets = labels2()
        .into_iter()
        .map(|a| (a, ["Hips-acc".to_string(), "Bag-gyro".to_string()].into()))
        .collect();
    let w = run_protocol(&dep, &labels2(), &frames, &folds, &cfg, ProtocolMode::WDgp, Some(&all), &opts, 3).unwrap();
    assert_eq!(w.per_fold, wo.per_fold);
    let sup = ProtocolOptions {
        supplement: true,
        ..Default::default()
    };
    run_protocol(&dep, &labels2(), &frames, &folds, &cfg, ProtocolMode::WHExp, Some(&all), &sup, 3).unwrap();
}

#[test]
fn deterministic_metrics() {
    let frames = toy(30, 16, 8);
    let idx: Vec<usize> = (0..30).collect();
    let cfg = ModelConfig {
        kernel_sizes: [5, 5, 5],
        epochs: 5,
        ..Default::default()
    };
    let a = fit(&cfg, &deployment(2), &labels2(), &frames, &idx, None, 11).unwrap();
    let b = fit(&cfg, &deployment(2), &labels2(), &frames, &idx, None, 11).unwrap();
    assert_eq!(a, b);
    assert_eq!(evaluate(&a, &frames, &idx, true), evaluate(&b, &frames, &idx, true));
}
