//! Shared test oracles. Independent of the graph's backward path: gradients
//! are re-derived here by central finite differences over repeated forward
//! evaluations.

#![allow(dead_code)]

use s2v_core::rng::Rng;
use s2v_core::Tensor;

pub const FD_STEP: f64 = 1e-4;

/// Central-difference gradient of a scalar function of one tensor.
pub fn fd_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.numel()];
    let mut probe = x.clone();
    for (i, slot) in grad.iter_mut().enumerate() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + FD_STEP;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - FD_STEP;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        *slot = (plus - minus) / (2.0 * FD_STEP);
    }
    grad
}

/// Element-wise maximum relative error between two gradients.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Random tensor with entries drawn from a scaled normal.
pub fn randn(rng: &mut Rng, shape: &[usize], std: f64) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel).map(|_| rng.normal() * std).collect();
    Tensor::from_vec(shape.to_vec(), data).unwrap()
}

/// Random tensor bounded away from zero, for kinked ops (relu/abs) where a
/// finite-difference probe must not cross the kink.
pub fn randn_away_from_zero(rng: &mut Rng, shape: &[usize], std: f64, min_abs: f64) -> Tensor {
    let numel: usize = shape.iter().product();
    let data: Vec<f64> = (0..numel)
        .map(|_| {
            let mut v = rng.normal() * std;
            while v.abs() < min_abs {
                v = rng.normal() * std;
            }
            v
        })
        .collect();
    Tensor::from_vec(shape.to_vec(), data).unwrap()
}

use s2v_core::{Graph, NodeId};

/// Weighted-sum head: loss = sum(output * w) for a fixed random w, so
/// transposed or misrouted adjoints cannot cancel.
pub fn scalarize(g: &mut Graph, out: NodeId, w: &Tensor) -> NodeId {
    let wn = g.constant(w).unwrap();
    let prod = g.mul(out, wn).unwrap();
    g.sum_all(prod).unwrap()
}

/// Check gradients of `build` w.r.t. every input against finite differences.
pub fn check_op(inputs: &[Tensor], tol: f64, build: impl Fn(&mut Graph, &[NodeId]) -> NodeId) {
    let mut g = Graph::new();
    let nodes: Vec<NodeId> = inputs
        .iter()
        .map(|t| {
            let mut t = t.clone();
            t.set_requires_grad(true);
            g.input(&t).unwrap()
        })
        .collect();
    let loss = build(&mut g, &nodes);
    assert_eq!(g.value(loss).len(), 1, "check_op expects a scalar loss");
    g.backward(loss).unwrap();

    for (idx, input) in inputs.iter().enumerate() {
        let analytic = g
            .grad(nodes[idx])
            .unwrap_or_else(|| panic!("input {idx} received no gradient"))
            .to_vec();
        let numeric = fd_grad(input, |probe| {
            let mut fg = Graph::new();
            let fnodes: Vec<NodeId> = inputs
                .iter()
                .enumerate()
                .map(|(j, t)| {
                    if j == idx {
                        fg.input(probe).unwrap()
                    } else {
                        fg.input(t).unwrap()
                    }
                })
                .collect();
            let l = build(&mut fg, &fnodes);
            fg.scalar_value(l)
        });
        let err = max_rel_err(&analytic, &numeric);
        assert!(
            err < tol,
            "input {idx}: max rel err {err:.3e} exceeds {tol:.1e}"
        );
    }
}
