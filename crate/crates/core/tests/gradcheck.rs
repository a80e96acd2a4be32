//! Central-difference checks for every differentiable graph operation.
//!
//! Each check scalarizes the op's output through a fixed random weighting
//! (so transposed or misrouted adjoints cannot cancel out) and compares the
//! tape gradient against an independent finite-difference probe.

mod common;

use common::{check_op, randn, randn_away_from_zero, scalarize};
use s2v_core::rng::Rng;
use s2v_core::{Graph, Tensor};

const TOL: f64 = 1e-4;

#[test]
fn matmul_identity_passthrough() {
    let mut g = Graph::new();
    let eye = Tensor::from_vec(vec![3, 3], vec![1., 0., 0., 0., 1., 0., 0., 0., 1.]).unwrap();
    let b = Tensor::from_vec(vec![3, 2], vec![5., -1., 2., 0.5, 3., 7.]).unwrap();
    let i = g.input(&eye).unwrap();
    let bn = g.input(&b).unwrap();
    let c = g.matmul(i, bn).unwrap();
    assert_eq!(g.value(c), b.data());
}

#[test]
fn matmul_hand_arithmetic() {
    let mut g = Graph::new();
    let a = g
        .input(&Tensor::from_vec(vec![1, 2], vec![1.0, 2.0]).unwrap())
        .unwrap();
    let b = g
        .input(&Tensor::from_vec(vec![2, 1], vec![3.0, 4.0]).unwrap())
        .unwrap();
    let c = g.matmul(a, b).unwrap();
    assert_eq!(g.value(c), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_reports_both_shapes() {
    let mut g = Graph::new();
    let a = g.input(&Tensor::zeros(&[2, 3])).unwrap();
    let b = g.input(&Tensor::zeros(&[4, 2])).unwrap();
    let err = g.matmul(a, b).unwrap_err().to_string();
    assert!(err.contains("[2, 3]") && err.contains("[4, 2]"), "{err}");
}

#[test]
fn matmul_gradcheck_4x5_5x3() {
    let mut rng = Rng::seed_from(11);
    let a = randn(&mut rng, &[4, 5], 1.0);
    let b = randn(&mut rng, &[5, 3], 1.0);
    let w = randn(&mut rng, &[4, 3], 1.0);
    check_op(&[a, b], TOL, |g, n| {
        let c = g.matmul(n[0], n[1]).unwrap();
        scalarize(g, c, &w)
    });
}

#[test]
fn matmul_nt_gradcheck() {
    let mut rng = Rng::seed_from(12);
    let a = randn(&mut rng, &[4, 6], 1.0);
    let b = randn(&mut rng, &[3, 6], 1.0);
    let w = randn(&mut rng, &[4, 3], 1.0);
    check_op(&[a, b], TOL, |g, n| {
        let c = g.matmul_nt(n[0], n[1]).unwrap();
        scalarize(g, c, &w)
    });
}

#[test]
fn conv2d_one_by_one_identity() {
    let mut rng = Rng::seed_from(13);
    let x = randn(&mut rng, &[1, 2, 4, 4], 1.0);
    let mut g = Graph::new();
    let xn = g.input(&x).unwrap();
    // two output channels, each selecting one input channel
    let w = Tensor::from_vec(vec![2, 2, 1, 1], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    let wn = g.input(&w).unwrap();
    let y = g.conv2d(xn, wn, None, 1, 0).unwrap();
    assert_eq!(g.value(y), x.data());
}

#[test]
fn conv2d_zero_input_gives_bias() {
    let mut g = Graph::new();
    let x = g.input(&Tensor::zeros(&[1, 1, 4, 4])).unwrap();
    let w = g.input(&Tensor::zeros(&[3, 1, 3, 3])).unwrap();
    let b = g
        .input(&Tensor::from_vec(vec![3], vec![0.5, -1.0, 2.0]).unwrap())
        .unwrap();
    let y = g.conv2d(x, w, Some(b), 1, 1).unwrap();
    let v = g.value(y);
    for ch in 0..3 {
        let expect = [0.5, -1.0, 2.0][ch];
        assert!(v[ch * 16..(ch + 1) * 16].iter().all(|&p| p == expect));
    }
}

#[test]
fn conv2d_non_integral_output_is_config_error() {
    let mut g = Graph::new();
    let x = g.input(&Tensor::zeros(&[1, 1, 5, 5])).unwrap();
    let w = g.input(&Tensor::zeros(&[1, 1, 2, 2])).unwrap();
    let err = g.conv2d(x, w, None, 2, 0).unwrap_err();
    assert!(matches!(err, s2v_core::Error::Config(_)), "{err:?}");
}

#[test]
fn conv2d_gradcheck_2x3x8x8_with_4x3x3x3() {
    let mut rng = Rng::seed_from(14);
    let x = randn(&mut rng, &[2, 3, 8, 8], 1.0);
    let w = randn(&mut rng, &[4, 3, 3, 3], 0.5);
    let b = randn(&mut rng, &[4], 0.5);
    let head = randn(&mut rng, &[2, 4, 8, 8], 1.0);
    check_op(&[x, w, b], TOL, |g, n| {
        let y = g.conv2d(n[0], n[1], Some(n[2]), 1, 1).unwrap();
        scalarize(g, y, &head)
    });
}

#[test]
fn conv2d_replicate_padding_gradcheck() {
    let mut rng = Rng::seed_from(55);
    let x = randn(&mut rng, &[1, 2, 5, 5], 1.0);
    let w = randn(&mut rng, &[3, 2, 3, 3], 0.5);
    let head = randn(&mut rng, &[1, 3, 5, 5], 1.0);
    check_op(&[x, w], TOL, |g, n| {
        let y = g
            .conv2d_padded(n[0], n[1], None, 1, 1, s2v_core::tensor::PadMode::Replicate)
            .unwrap();
        scalarize(g, y, &head)
    });
}

#[test]
fn conv2d_replicate_padding_extends_edges() {
    // constant input stays exactly constant under an averaging kernel only
    // when the padding replicates the edge
    let mut g = Graph::new();
    let x = g.input(&Tensor::full(&[1, 1, 4, 4], 0.5)).unwrap();
    let w = g.input(&Tensor::full(&[1, 1, 3, 3], 1.0 / 9.0)).unwrap();
    let y = g
        .conv2d_padded(x, w, None, 1, 1, s2v_core::tensor::PadMode::Replicate)
        .unwrap();
    for v in g.value(y) {
        assert!((v - 0.5).abs() < 1e-12);
    }
}

#[test]
fn conv2d_gradcheck_stride2() {
    let mut rng = Rng::seed_from(15);
    let x = randn(&mut rng, &[1, 2, 6, 6], 1.0);
    let w = randn(&mut rng, &[3, 2, 2, 2], 0.5);
    let head = randn(&mut rng, &[1, 3, 3, 3], 1.0);
    check_op(&[x, w], TOL, |g, n| {
        let y = g.conv2d(n[0], n[1], None, 2, 0).unwrap();
        scalarize(g, y, &head)
    });
}

#[test]
fn upsample_replicates_and_sums() {
    let mut g = Graph::new();
    let one = g.input(&Tensor::from_vec(vec![1, 1, 1, 1], vec![1.0]).unwrap()).unwrap();
    let up = g.upsample_nearest2x(one).unwrap();
    assert_eq!(g.value(up), &[1.0, 1.0, 1.0, 1.0]);

    let mut rng = Rng::seed_from(16);
    let x = randn(&mut rng, &[2, 3, 4, 4], 1.0);
    let mut g = Graph::new();
    let xn = g.input(&x).unwrap();
    let up = g.upsample_nearest2x(xn).unwrap();
    let sum_in: f64 = x.data().iter().sum();
    let sum_out: f64 = g.value(up).iter().sum();
    assert!((sum_out - 4.0 * sum_in).abs() < 1e-9);

    // constant input stays constant
    let c = Tensor::full(&[1, 1, 2, 2], 0.7);
    let mut g = Graph::new();
    let cn = g.input(&c).unwrap();
    let up = g.upsample_nearest2x(cn).unwrap();
    assert!(g.value(up).iter().all(|&v| v == 0.7));
}

#[test]
fn upsample_and_avgpool_gradcheck() {
    let mut rng = Rng::seed_from(17);
    let x = randn(&mut rng, &[1, 2, 4, 4], 1.0);
    let w_up = randn(&mut rng, &[1, 2, 8, 8], 1.0);
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let y = g.upsample_nearest2x(n[0]).unwrap();
        scalarize(g, y, &w_up)
    });
    let w_pool = randn(&mut rng, &[1, 2, 2, 2], 1.0);
    check_op(&[x], TOL, |g, n| {
        let y = g.avgpool2x(n[0]).unwrap();
        scalarize(g, y, &w_pool)
    });
}

#[test]
fn avgpool_odd_extent_is_config_error() {
    let mut g = Graph::new();
    let x = g.input(&Tensor::zeros(&[1, 1, 3, 4])).unwrap();
    assert!(matches!(
        g.avgpool2x(x).unwrap_err(),
        s2v_core::Error::Config(_)
    ));
}

#[test]
fn softmax_uniform_rows() {
    let mut g = Graph::new();
    let x = g.input(&Tensor::zeros(&[1, 3])).unwrap();
    let y = g.softmax_lastdim(x).unwrap();
    for v in g.value(y) {
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn softmax_rows_sum_to_one() {
    let mut rng = Rng::seed_from(18);
    let x = randn(&mut rng, &[5, 7], 3.0);
    let mut g = Graph::new();
    let xn = g.input(&x).unwrap();
    let y = g.softmax_lastdim(xn).unwrap();
    for row in g.value(y).chunks(7) {
        assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn tanh_range_and_zero() {
    let mut g = Graph::new();
    // f64 tanh saturates to exactly +/-1 beyond |x| ~ 19; the open-range
    // property holds for the magnitudes the model actually produces.
    let x = g
        .input(&Tensor::from_vec(vec![1, 3], vec![0.0, 15.0, -15.0]).unwrap())
        .unwrap();
    let y = g.tanh(x).unwrap();
    let v = g.value(y);
    assert_eq!(v[0], 0.0);
    assert!(v.iter().all(|&t| t > -1.0 && t < 1.0));
}

#[test]
fn elementwise_ops_gradcheck() {
    let mut rng = Rng::seed_from(19);
    let shape = [3, 4];
    let w = randn(&mut rng, &shape, 1.0);

    let x = randn(&mut rng, &shape, 1.0);
    let y = randn(&mut rng, &shape, 1.0);
    check_op(&[x.clone(), y.clone()], TOL, |g, n| {
        let z = g.add(n[0], n[1]).unwrap();
        scalarize(g, z, &w)
    });
    check_op(&[x.clone(), y.clone()], TOL, |g, n| {
        let z = g.sub(n[0], n[1]).unwrap();
        scalarize(g, z, &w)
    });
    check_op(&[x.clone(), y.clone()], TOL, |g, n| {
        let z = g.mul(n[0], n[1]).unwrap();
        scalarize(g, z, &w)
    });
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let z = g.scale(n[0], -2.5).unwrap();
        scalarize(g, z, &w)
    });
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let z = g.add_scalar(n[0], 3.0).unwrap();
        scalarize(g, z, &w)
    });
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let z = g.square(n[0]).unwrap();
        scalarize(g, z, &w)
    });
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let z = g.tanh(n[0]).unwrap();
        scalarize(g, z, &w)
    });
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let z = g.gelu(n[0]).unwrap();
        scalarize(g, z, &w)
    });

    let kinked = randn_away_from_zero(&mut rng, &shape, 1.0, 10.0 * common::FD_STEP);
    check_op(std::slice::from_ref(&kinked), TOL, |g, n| {
        let z = g.relu(n[0]).unwrap();
        scalarize(g, z, &w)
    });
    check_op(&[kinked], TOL, |g, n| {
        let z = g.abs(n[0]).unwrap();
        scalarize(g, z, &w)
    });
}

#[test]
fn softmax_layernorm_bias_gradcheck() {
    let mut rng = Rng::seed_from(20);
    let x = randn(&mut rng, &[3, 5], 1.0);
    let w = randn(&mut rng, &[3, 5], 1.0);
    check_op(std::slice::from_ref(&x), TOL, |g, n| {
        let z = g.softmax_lastdim(n[0]).unwrap();
        scalarize(g, z, &w)
    });

    let gamma = randn(&mut rng, &[5], 0.5);
    let beta = randn(&mut rng, &[5], 0.5);
    check_op(&[x.clone(), gamma, beta], 1e-3, |g, n| {
        let z = g.layer_norm(n[0], n[1], n[2], 1e-5).unwrap();
        scalarize(g, z, &w)
    });

    let bias = randn(&mut rng, &[5], 1.0);
    check_op(&[x, bias], TOL, |g, n| {
        let z = g.add_bias_row(n[0], n[1]).unwrap();
        scalarize(g, z, &w)
    });
}

#[test]
fn gather_rows_gradcheck_and_count_matrix() {
    let mut rng = Rng::seed_from(21);
    let table = randn(&mut rng, &[6, 4], 1.0);
    let indices = [2usize, 0, 2, 5];
    let w = randn(&mut rng, &[4, 4], 1.0);
    check_op(std::slice::from_ref(&table), TOL, |g, n| {
        let z = g.gather_rows(n[0], &indices).unwrap();
        scalarize(g, z, &w)
    });

    // gradient of sum(gather) w.r.t. the table counts index occurrences
    let mut g = Graph::new();
    let mut t = table.clone();
    t.set_requires_grad(true);
    let tn = g.input(&t).unwrap();
    let rows = g.gather_rows(tn, &indices).unwrap();
    let s = g.sum_all(rows).unwrap();
    g.backward(s).unwrap();
    let grad = g.grad(tn).unwrap();
    let mut counts = [0.0; 6];
    for &i in &indices {
        counts[i] += 1.0;
    }
    for (row, &c) in counts.iter().enumerate() {
        assert!(grad[row * 4..(row + 1) * 4].iter().all(|&v| v == c));
    }
}

#[test]
fn gather_rows_out_of_range_is_contract_error() {
    let mut g = Graph::new();
    let t = g.input(&Tensor::zeros(&[3, 2])).unwrap();
    assert!(matches!(
        g.gather_rows(t, &[0, 3]).unwrap_err(),
        s2v_core::Error::Contract(_)
    ));
}

#[test]
fn shape_ops_gradcheck() {
    let mut rng = Rng::seed_from(22);
    let a = randn(&mut rng, &[2, 3], 1.0);
    let b = randn(&mut rng, &[4, 3], 1.0);
    let w_rows = randn(&mut rng, &[6, 3], 1.0);
    check_op(&[a.clone(), b.clone()], TOL, |g, n| {
        let z = g.concat_rows(&[n[0], n[1]]).unwrap();
        scalarize(g, z, &w_rows)
    });

    let c = randn(&mut rng, &[2, 5], 1.0);
    let w_cols = randn(&mut rng, &[2, 8], 1.0);
    check_op(&[a.clone(), c.clone()], TOL, |g, n| {
        let z = g.concat_cols(&[n[0], n[1]]).unwrap();
        scalarize(g, z, &w_cols)
    });

    let w_slice = randn(&mut rng, &[2, 2], 1.0);
    check_op(&[c], TOL, |g, n| {
        let z = g.slice_cols(n[0], 1, 2).unwrap();
        scalarize(g, z, &w_slice)
    });

    let img_a = randn(&mut rng, &[2, 2, 3, 3], 1.0);
    let img_b = randn(&mut rng, &[2, 1, 3, 3], 1.0);
    let w_ch = randn(&mut rng, &[2, 3, 3, 3], 1.0);
    check_op(&[img_a, img_b], TOL, |g, n| {
        let z = g.concat_channels(n[0], n[1]).unwrap();
        scalarize(g, z, &w_ch)
    });

    let d = randn(&mut rng, &[2, 6], 1.0);
    let w_rs = randn(&mut rng, &[3, 4], 1.0);
    check_op(&[d], TOL, |g, n| {
        let z = g.reshape(n[0], &[3, 4]).unwrap();
        scalarize(g, z, &w_rs)
    });
}

#[test]
fn backward_of_sum_is_all_ones() {
    let mut g = Graph::new();
    let mut x = Tensor::zeros(&[2, 3]);
    x.set_requires_grad(true);
    let xn = g.input(&x).unwrap();
    let s = g.sum_all(xn).unwrap();
    g.backward(s).unwrap();
    assert_eq!(g.grad(xn).unwrap(), &[1.0; 6]);
}

#[test]
fn double_use_accumulates_to_twos() {
    let mut g = Graph::new();
    let mut x = Tensor::zeros(&[4]);
    x.set_requires_grad(true);
    let xn = g.input(&x).unwrap();
    let s1 = g.sum_all(xn).unwrap();
    let s2 = g.sum_all(xn).unwrap();
    let total = g.add(s1, s2).unwrap();
    g.backward(total).unwrap();
    assert_eq!(g.grad(xn).unwrap(), &[2.0; 4]);
}

#[test]
fn backward_rejects_non_scalar_loss() {
    let mut g = Graph::new();
    let x = g.input(&Tensor::zeros(&[2, 2]).with_requires_grad()).unwrap();
    assert!(matches!(
        g.backward(x).unwrap_err(),
        s2v_core::Error::Contract(_)
    ));
}

#[test]
fn cross_entropy_matches_scalar_loop_and_fd() {
    let mut rng = Rng::seed_from(23);
    let logits = randn(&mut rng, &[4, 6], 2.0);
    let targets = [1usize, 5, 0, 3];

    // independent scalar-loop implementation
    let mut expect = 0.0;
    for (row, &t) in targets.iter().enumerate() {
        let r = &logits.data()[row * 6..(row + 1) * 6];
        let max = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = r.iter().map(|v| (v - max).exp()).sum();
        expect += -(r[t] - max - z.ln());
    }
    expect /= targets.len() as f64;

    let mut g = Graph::new();
    let ln = g.input(&logits).unwrap();
    let ce = g.cross_entropy(ln, &targets, None).unwrap();
    assert!((g.scalar_value(ce) - expect).abs() < 1e-9);

    check_op(&[logits], TOL, |g, n| {
        g.cross_entropy(n[0], &targets, None).unwrap()
    });
}

#[test]
fn cross_entropy_ignores_pad_rows() {
    let mut rng = Rng::seed_from(24);
    let logits = randn(&mut rng, &[3, 5], 1.0);
    let mut g = Graph::new();
    let ln = g.input(&logits).unwrap();
    // row 1 is PAD (=0) and must not contribute
    let with_pad = g.cross_entropy(ln, &[2, 0, 4], Some(0)).unwrap();

    let kept = Tensor::from_vec(
        vec![2, 5],
        [&logits.data()[0..5], &logits.data()[10..15]].concat(),
    )
    .unwrap();
    let mut g2 = Graph::new();
    let kn = g2.input(&kept).unwrap();
    let without_pad = g2.cross_entropy(kn, &[2, 4], None).unwrap();
    assert_eq!(g.scalar_value(with_pad), g2.scalar_value(without_pad));
}

#[test]
fn uniform_logits_cost_is_ln_vocab() {
    let mut g = Graph::new();
    let logits = g.input(&Tensor::zeros(&[2, 4])).unwrap();
    let ce = g.cross_entropy(logits, &[1, 3], None).unwrap();
    assert!((g.scalar_value(ce) - 4.0f64.ln()).abs() < 1e-12);
}

#[test]
fn replay_is_bitwise_deterministic() {
    let run = || {
        let mut rng = Rng::seed_from(99);
        let x = randn(&mut rng, &[4, 4], 1.0).with_requires_grad();
        let w = randn(&mut rng, &[4, 4], 1.0).with_requires_grad();
        let mut g = Graph::new();
        let xn = g.input(&x).unwrap();
        let wn = g.input(&w).unwrap();
        let h = g.matmul(xn, wn).unwrap();
        let h = g.tanh(h).unwrap();
        let s = g.softmax_lastdim(h).unwrap();
        let loss = g.mean_all(s).unwrap();
        g.backward(loss).unwrap();
        (
            g.scalar_value(loss),
            g.grad(xn).unwrap().to_vec(),
            g.grad(wn).unwrap().to_vec(),
        )
    };
    let (l1, gx1, gw1) = run();
    let (l2, gx2, gw2) = run();
    assert!(l1.to_bits() == l2.to_bits());
    assert!(gx1.iter().zip(&gx2).all(|(a, b)| a.to_bits() == b.to_bits()));
    assert!(gw1.iter().zip(&gw2).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn finite_check_names_the_op() {
    let mut g = Graph::new().with_finite_checks(true);
    let x = g
        .input(&Tensor::from_vec(vec![2], vec![1.0e308, 1.0e308]).unwrap())
        .unwrap();
    // 1e308 + 1e308 overflows to Inf
    let err = g.add(x, x).unwrap_err();
    match err {
        s2v_core::Error::NonFinite { context } => assert!(context.contains("add"), "{context}"),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn mean_all_gradcheck() {
    let mut rng = Rng::seed_from(25);
    let x = randn(&mut rng, &[3, 3], 1.0);
    check_op(std::slice::from_ref(&x), TOL, |g, n| g.mean_all(n[0]).unwrap());
    check_op(&[x], TOL, |g, n| g.sum_all(n[0]).unwrap());
}
