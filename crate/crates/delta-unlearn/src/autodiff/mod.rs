//! Dense tensors with reverse-mode automatic differentiation, plus the
//! Adam optimizer. Everything is f64; models here are small enough that
//! precision beats speed and makes oracle comparisons exact.

pub mod adam;
pub mod kernels;
pub mod params;
pub mod tape;
pub mod tensor;

pub use adam::Adam;
pub use params::{Param, ParamId, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::{log_softmax_at, softmax, Tensor};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    /// Central finite differences of a scalar-valued function of one
    /// parameter entry.
    fn finite_diff<F>(store: &mut ParamStore, pid: ParamId, idx: usize, h: f64, f: F) -> f64
    where
        F: Fn(&ParamStore) -> f64,
    {
        let orig = store.value(pid).data()[idx];
        store.get_mut(pid).value.data_mut()[idx] = orig + h;
        let up = f(store);
        store.get_mut(pid).value.data_mut()[idx] = orig - h;
        let down = f(store);
        store.get_mut(pid).value.data_mut()[idx] = orig;
        (up - down) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn matmul_identity_and_scalar_cases() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let eye = tape.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap());
        let m = tape.constant(Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap());
        let prod = tape.matmul(eye, m).unwrap();
        assert_eq!(tape.value(prod).data(), &[3.0, 4.0, 5.0, 6.0]);

        let a = tape.constant(Tensor::new(vec![1, 1], vec![2.0]).unwrap());
        let b = tape.constant(Tensor::new(vec![1, 1], vec![3.0]).unwrap());
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).item(), 6.0);
    }

    #[test]
    fn matmul_shape_mismatch_is_dimension_error() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let a = tape.constant(Tensor::zeros(vec![2, 3]));
        let b = tape.constant(Tensor::zeros(vec![2, 3]));
        assert!(matches!(
            tape.matmul(a, b),
            Err(crate::error::Error::Dimension(_))
        ));
    }

    #[test]
    fn matmul_matches_triple_loop_oracle() {
        let mut rng = Rng::new(1);
        let a: Vec<f64> = (0..12).map(|_| rng.next_normal()).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.next_normal()).collect();
        let mut want = vec![0.0; 6];
        for i in 0..3 {
            for j in 0..2 {
                for l in 0..4 {
                    want[i * 2 + j] += a[i * 4 + l] * b[l * 2 + j];
                }
            }
        }
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let an = tape.constant(Tensor::new(vec![3, 4], a).unwrap());
        let bn = tape.constant(Tensor::new(vec![4, 2], b).unwrap());
        let c = tape.matmul(an, bn).unwrap();
        for (x, y) in tape.value(c).data().iter().zip(&want) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let logits = tape.constant(Tensor::new(vec![4], vec![0.7; 4]).unwrap());
        let loss = tape.cross_entropy_rows(logits, &[2]).unwrap();
        assert!((tape.value(loss).item() - 4.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_confident_logits() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let logits = tape.constant(Tensor::new(vec![2], vec![10.0, -10.0]).unwrap());
        let loss = tape.cross_entropy_rows(logits, &[0]).unwrap();
        // -ln(e^10 / (e^10 + e^-10)) = ln(1 + e^-20)
        let want = (1.0 + (-20.0f64).exp()).ln();
        assert!((tape.value(loss).item() - want).abs() < 1e-15);
        assert!((tape.value(loss).item() - 2.061e-9).abs() < 1e-11);
    }

    #[test]
    fn cross_entropy_target_out_of_range() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let logits = tape.constant(Tensor::new(vec![3], vec![0.0; 3]).unwrap());
        assert!(matches!(
            tape.cross_entropy_rows(logits, &[3]),
            Err(crate::error::Error::Index(_))
        ));
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut store = ParamStore::new();
        let pid = store.add("logits", Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
        let eval = |s: &ParamStore| {
            let mut t = Tape::new(s, false);
            let l = t.param(pid);
            let loss = t.cross_entropy_rows(l, &[1]).unwrap();
            t.value(loss).item()
        };
        let mut tape = Tape::new(&store, true);
        let l = tape.param(pid);
        let loss = tape.cross_entropy_rows(l, &[1]).unwrap();
        tape.backward(loss).unwrap();
        let grads = tape.param_grads();
        let analytic = grads[pid.0].as_ref().unwrap().data().to_vec();
        drop(tape);
        for idx in 0..3 {
            let fd = finite_diff(&mut store, pid, idx, 1e-5, eval);
            assert!(
                rel_err(analytic[idx], fd) < 1e-6,
                "idx {idx}: analytic {} vs fd {fd}",
                analytic[idx]
            );
        }
    }

    #[test]
    fn backward_on_non_scalar_is_contract_error() {
        let mut store = ParamStore::new();
        let pid = store.add("x", Tensor::zeros(vec![2, 2]));
        let mut tape = Tape::new(&store, true);
        let x = tape.param(pid);
        assert!(matches!(
            tape.backward(x),
            Err(crate::error::Error::Contract(_))
        ));
    }

    #[test]
    fn backward_without_grad_leaves_is_noop() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        let x = tape.constant(Tensor::scalar(2.0));
        let y = tape.scale(x, 3.0);
        tape.backward(y).unwrap();
        assert!(tape.grad(x).is_none());
        assert!(tape.grad(y).is_none());
    }

    #[test]
    fn every_op_gradient_matches_finite_differences() {
        // A composite graph exercising matmul, bias broadcast, gelu,
        // layer norm, attention, embedding, row select, scale, add,
        // cross entropy and KL.
        let mut rng = Rng::new(99);
        let d = 8;
        let vocab = 6;
        let seq = 4;
        let mut store = ParamStore::new();
        let tok = store.add("tok", Tensor::randn(vec![vocab, d], 0.5, &mut rng));
        let pos = store.add("pos", Tensor::randn(vec![seq, d], 0.5, &mut rng));
        let w = store.add("w", Tensor::randn(vec![d, d], 0.5, &mut rng));
        let bias = store.add("b", Tensor::randn(vec![d], 0.5, &mut rng));
        let gamma = store.add("g", Tensor::randn(vec![d], 0.2, &mut rng));
        let beta = store.add("be", Tensor::randn(vec![d], 0.2, &mut rng));
        let head = store.add("head", Tensor::randn(vec![d, vocab], 0.5, &mut rng));

        let ids: Vec<u32> = vec![1, 3, 0, 2];
        let p_ref_data: Vec<f64> = {
            let raw: Vec<f64> = (0..vocab).map(|_| rng.next_f64() + 0.1).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let p_ref = Tensor::new(vec![1, vocab], p_ref_data).unwrap();

        let build = |s: &ParamStore| -> (f64, Option<Vec<Option<Tensor>>>) {
            let mut t = Tape::new(s, true);
            let tokn = t.param(tok);
            let posn = t.param(pos);
            let x = t.embed(tokn, posn, &ids).unwrap();
            let wn = t.param(w);
            let bn = t.param(bias);
            let h1 = t.matmul(x, wn).unwrap();
            let h1 = t.add_row_broadcast(h1, bn).unwrap();
            let h1 = t.gelu(h1);
            let gn = t.param(gamma);
            let ben = t.param(beta);
            let h2 = t.layer_norm(h1, gn, ben).unwrap();
            let att = t.causal_attention(h2, h2, h2, 2).unwrap();
            let res = t.add(att, x).unwrap();
            let sel = t.select_rows(res, &[1, 3]).unwrap();
            let hn = t.param(head);
            let logits = t.matmul(sel, hn).unwrap();
            let ce = t.cross_entropy_rows(logits, &[2, 4]).unwrap();
            let last = t.select_rows(logits, &[1]).unwrap();
            let kl = t.kl_from_fixed(last, &p_ref).unwrap();
            let kl_scaled = t.scale(kl, 0.7);
            let loss = t.mean_scalars(&[ce, kl_scaled]).unwrap();
            let val = t.value(loss).item();
            t.backward(loss).unwrap();
            (val, Some(t.param_grads()))
        };

        let (_, grads) = build(&store);
        let grads = grads.unwrap();
        let eval = |s: &ParamStore| build(s).0;

        let mut rng2 = Rng::new(7);
        for pid in [tok, pos, w, bias, gamma, beta, head] {
            let p = store.get(pid).clone();
            let g = grads[pid.0].as_ref().expect("grad present");
            // Sample a handful of entries per parameter.
            for _ in 0..4 {
                let idx = rng2.gen_range(p.value.len());
                let fd = finite_diff(&mut store, pid, idx, 1e-5, eval);
                let an = g.data()[idx];
                if an.abs() < 1e-10 && fd.abs() < 1e-6 {
                    continue; // embedding rows not touched by ids
                }
                assert!(
                    rel_err(an, fd) < 1e-4,
                    "param {} idx {idx}: analytic {an} vs fd {fd}",
                    p.name
                );
            }
        }
    }

    #[test]
    fn repeated_backward_accumulates() {
        let mut store = ParamStore::new();
        let pid = store.add("x", Tensor::scalar(2.0));
        let mut tape = Tape::new(&store, true);
        let x = tape.param(pid);
        let y = tape.scale(x, 3.0);
        tape.backward(y).unwrap();
        tape.backward(y).unwrap();
        let g = tape.param_grads()[pid.0].clone().unwrap();
        assert_eq!(g.item(), 6.0);
    }

    #[test]
    fn kl_hand_evaluated_example() {
        let store = ParamStore::new();
        let mut tape = Tape::new(&store, false);
        // q = softmax(logits) = [0.9, 0.1]
        let logits = tape.constant(
            Tensor::new(vec![1, 2], vec![0.9f64.ln(), 0.1f64.ln()]).unwrap(),
        );
        let p = Tensor::new(vec![1, 2], vec![0.5, 0.5]).unwrap();
        let kl = tape.kl_from_fixed(logits, &p).unwrap();
        let want = 0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln();
        assert!((tape.value(kl).item() - want).abs() < 1e-12);
        assert!((want - 0.5108).abs() < 1e-4);
    }

    #[test]
    fn kl_nonnegative_on_random_inputs() {
        let mut rng = Rng::new(4);
        let store = ParamStore::new();
        for _ in 0..100 {
            let mut tape = Tape::new(&store, false);
            let logits: Vec<f64> = (0..8).map(|_| rng.next_normal() * 3.0).collect();
            let raw: Vec<f64> = (0..8).map(|_| rng.next_f64() + 1e-3).collect();
            let s: f64 = raw.iter().sum();
            let p = Tensor::new(vec![1, 8], raw.iter().map(|v| v / s).collect()).unwrap();
            let l = tape.constant(Tensor::new(vec![1, 8], logits).unwrap());
            let kl = tape.kl_from_fixed(l, &p).unwrap();
            assert!(tape.value(kl).item() >= -1e-12);
        }
    }
}
