//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EngineError, Tape, Tensor, Var};

pub const FD_EPS: f64 = 1e-5;
pub const REL_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_SEEDS: [u64; 5] = [42, 43, 44, 45, 46];

/// |a − n| / max(|a|, |n|, 1e-6).
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Largest relative error per input of `f` between tape gradients and
/// central differences with step `eps`.
pub fn check_gradients<F>(inputs: &[Tensor], eps: f64, f: F) -> Result<Vec<f64>, EngineError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, EngineError>,
{
    let eval = |vals: &[Tensor]| -> Result<f64, EngineError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.param(t.clone())).collect();
        let loss = f(&mut tape, &vars)?;
        Ok(tape.value(loss).item())
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    let grads = tape.backward(loss)?;

    let mut worst = Vec::with_capacity(inputs.len());
    let mut probe = inputs.to_vec();
    for (idx, &v) in vars.iter().enumerate() {
        let analytic = grads.get(v);
        let mut max_err: f64 = 0.0;
        for e in 0..inputs[idx].len() {
            let orig = inputs[idx].data()[e];
            probe[idx].data_mut()[e] = orig + eps;
            let up = eval(&probe)?;
            probe[idx].data_mut()[e] = orig - eps;
            let down = eval(&probe)?;
            probe[idx].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * eps);
            max_err = max_err.max(relative_error(analytic.data()[e], numeric));
        }
        worst.push(max_err);
    }
    Ok(worst)
}

/// Worst relative error of one operand of one op across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct OpCheck {
    pub op: &'static str,
    pub operand: &'static str,
    pub seeds: usize,
    pub max_rel_error: f64,
}

impl OpCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error < REL_TOLERANCE
    }
}

type Case = (
    &'static str,
    &'static [&'static str],
    fn(&mut ChaCha8Rng) -> Vec<Tensor>,
    fn(&mut Tape, &[Var], &Tensor) -> Result<Var, EngineError>,
);

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Values bounded away from zero so relu kinks are never straddled.
fn rand_away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let m: f64 = rng.gen_range(0.05..1.0);
            if rng.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

/// Row-normalized path-graph partitions [I, D⁻¹A] for `n` nodes.
fn path_partitions(n: usize) -> Tensor {
    let mut data = vec![0.0; 2 * n * n];
    for i in 0..n {
        data[i * n + i] = 1.0;
        let nbrs: Vec<usize> = [i.wrapping_sub(1), i + 1].into_iter().filter(|&j| j < n).collect();
        for &j in &nbrs {
            data[n * n + i * n + j] = 1.0 / nbrs.len() as f64;
        }
    }
    Tensor::new(vec![2, n, n], data).unwrap()
}

/// Scalarizes an op output as ⟨out, r⟩ for a fixed random `r`.
fn project(tape: &mut Tape, out: Var, r: &Tensor) -> Result<Var, EngineError> {
    let shape = tape.value(out).shape().to_vec();
    let n: usize = shape.iter().product();
    let r = Tensor::new(shape, r.data()[..n].to_vec())?;
    let rv = tape.constant(r);
    tape.dot(out, rv)
}

fn cases() -> Vec<Case> {
    vec![
        (
            "conv2d",
            &["input", "kernel", "bias"],
            |rng| vec![rand_tensor(rng, &[2, 5, 5]), rand_tensor(rng, &[3, 2, 3, 3]), rand_tensor(rng, &[3])],
            |t, v, r| {
                let y = t.conv2d(v[0], v[1], Some(v[2]), 2, 1)?;
                project(t, y, r)
            },
        ),
        (
            "temporal_conv",
            &["input", "kernel", "bias"],
            |rng| vec![rand_tensor(rng, &[2, 7, 3]), rand_tensor(rng, &[3, 2, 3]), rand_tensor(rng, &[3])],
            |t, v, r| {
                let y = t.temporal_conv(v[0], v[1], Some(v[2]), 2, 1)?;
                project(t, y, r)
            },
        ),
        (
            "graph_conv",
            &["input", "weights", "masks"],
            |rng| {
                let masks = Tensor::new(
                    vec![2, 4, 4],
                    (0..32).map(|_| 1.0 + rng.gen_range(-0.5..0.5)).collect(),
                )
                .unwrap();
                vec![rand_tensor(rng, &[2, 3, 4]), rand_tensor(rng, &[2, 3, 2]), masks]
            },
            |t, v, r| {
                let a = t.constant(path_partitions(4));
                let y = t.graph_conv(v[0], a, v[1], v[2])?;
                project(t, y, r)
            },
        ),
        (
            "global_avg_pool",
            &["input"],
            |rng| vec![rand_tensor(rng, &[3, 4, 5])],
            |t, v, r| {
                let y = t.global_avg_pool(v[0]);
                project(t, y, r)
            },
        ),
        (
            "linear",
            &["x", "weight", "bias"],
            |rng| vec![rand_tensor(rng, &[5]), rand_tensor(rng, &[4, 5]), rand_tensor(rng, &[4])],
            |t, v, r| {
                let y = t.linear(v[0], v[1], Some(v[2]))?;
                project(t, y, r)
            },
        ),
        (
            "softmax_cross_entropy",
            &["logits"],
            |rng| vec![rand_tensor(rng, &[5])],
            |t, v, _| t.softmax_cross_entropy(v[0], 2),
        ),
        (
            "softmax+cross_entropy",
            &["logits"],
            |rng| vec![rand_tensor(rng, &[5])],
            |t, v, _| {
                let p = t.softmax(v[0])?;
                t.cross_entropy(p, 3)
            },
        ),
        (
            "relu",
            &["input"],
            |rng| vec![rand_away_from_zero(rng, &[3, 4])],
            |t, v, r| {
                let y = t.relu(v[0]);
                project(t, y, r)
            },
        ),
        (
            "add+mul+scale",
            &["a", "b"],
            |rng| vec![rand_tensor(rng, &[6]), rand_tensor(rng, &[6])],
            |t, v, r| {
                let s = t.add(v[0], v[1])?;
                let m = t.mul(s, v[0])?;
                let y = t.scale(m, -1.5);
                project(t, y, r)
            },
        ),
        (
            "sum",
            &["input"],
            |rng| vec![rand_tensor(rng, &[2, 3])],
            |t, v, _| {
                let sq = t.mul(v[0], v[0])?;
                Ok(t.sum(sq))
            },
        ),
    ]
}

/// Runs every registered op over `seeds`.
pub fn run_suite(seeds: &[u64]) -> Result<Vec<OpCheck>, EngineError> {
    let mut report = Vec::new();
    for (op, operands, make, build) in cases() {
        let mut worst = vec![0.0f64; operands.len()];
        for &seed in seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let inputs = make(&mut rng);
            let r = rand_tensor(&mut rng, &[256]);
            let errs = check_gradients(&inputs, FD_EPS, |t, v| build(t, v, &r))?;
            for (w, e) in worst.iter_mut().zip(errs) {
                *w = w.max(e);
            }
        }
        for (operand, max_rel_error) in operands.iter().zip(worst) {
            report.push(OpCheck {
                op,
                operand,
                seeds: seeds.len(),
                max_rel_error,
            });
        }
    }
    Ok(report)
}

/// One line per operand, `PASS`/`FAIL` with the worst error.
pub fn format_report(report: &[OpCheck]) -> String {
    let mut s = String::new();
    for c in report {
        s.push_str(&format!(
            "{} {}:{} max_rel_error={:.3e} seeds={}\n",
            if c.passed() { "PASS" } else { "FAIL" },
            c.op,
            c.operand,
            c.max_rel_error,
            c.seeds
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_op_passes_on_default_seeds() {
        let report = run_suite(&DEFAULT_SEEDS).unwrap();
        assert!(report.len() >= 18);
        for c in &report {
            assert!(c.passed(), "{}", format_report(std::slice::from_ref(c)));
        }
    }

    #[test]
    fn a_wrong_gradient_is_caught() {
        let x = Tensor::vector(vec![0.7, -0.4]);
        let errs = check_gradients(&[x], FD_EPS, |t, v| {
            let y = t.relu(v[0]);
            let c = t.constant(Tensor::vector(vec![0.3, 0.3]));
            // a constant copy carries the value of x but no gradient path
            let frozen = t.constant(t.value(v[0]).clone());
            let p = t.mul(frozen, c)?;
            let s = t.add(y, p)?;
            Ok(t.sum(s))
        })
        .unwrap();
        assert!(errs[0] > 0.1);
    }
}
