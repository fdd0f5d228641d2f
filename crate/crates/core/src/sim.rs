//! Time-domain simulation with the Bogacki–Shampine 2(3) pair.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_csv;
use crate::linalg::{CMat, C64};
use crate::system::LtiSystem;

/// Input signal driving a simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSignal {
    /// Unit impulse on every channel, one response per channel.
    Impulse,
    /// `u ≡ 1` on every channel.
    Step,
    /// Tabulated input, linearly interpolated and held constant outside the
    /// table. `values[k]` has one entry per input channel.
    Samples { times: Vec<f64>, values: Vec<Vec<C64>> },
}

impl InputSignal {
    pub fn samples(times: Vec<f64>, values: Vec<Vec<C64>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "{} sample times for {} sample values",
                times.len(),
                values.len()
            )));
        }
        if !times.windows(2).all(|w| w[0] < w[1]) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidArgument("sample times must be finite and strictly increasing".into()));
        }
        Ok(InputSignal::Samples { times, values })
    }

    fn check(&self, m: usize) -> Result<()> {
        if let InputSignal::Samples { values, .. } = self {
            if let Some(v) = values.iter().find(|v| v.len() != m) {
                return Err(Error::DimensionMismatch(format!("input sample has {} channels, system has {m}", v.len())));
            }
        }
        Ok(())
    }

    fn value(&self, t: f64, m: usize) -> CMat {
        match self {
            InputSignal::Impulse => CMat::zeros(m, 1),
            InputSignal::Step => CMat::from_element(m, 1, C64::new(1.0, 0.0)),
            InputSignal::Samples { times, values } => {
                let k = times.partition_point(|&s| s <= t);
                let v = if k == 0 {
                    values[0].clone()
                } else if k == times.len() {
                    values[k - 1].clone()
                } else {
                    let th = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    values[k - 1].iter().zip(&values[k]).map(|(a, b)| a + (b - a) * th).collect()
                };
                CMat::from_column_slice(m, 1, &v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Times the integrator must land on exactly.
    pub stops: Vec<f64>,
    /// Record only `t = 0` and the stop times instead of every step.
    pub record_stops_only: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { rel_tol: 1e-8, abs_tol: 1e-12, stops: Vec::new(), record_stops_only: false }
    }
}

/// Sampled outputs. For an impulse on `m` channels the output vector at each
/// time stacks the `m` responses, channel by channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<Vec<C64>>,
}

impl Trajectory {
    pub fn channels(&self) -> usize {
        self.outputs.first().map_or(0, |y| y.len())
    }

    /// Linear interpolation at `t`, clamped to the recorded range.
    pub fn sample(&self, t: f64) -> Result<Vec<C64>> {
        if self.times.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            return Ok(self.outputs[0].clone());
        }
        if k == self.times.len() {
            return Ok(self.outputs[k - 1].clone());
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let th = (t - t0) / (t1 - t0);
        Ok(self.outputs[k - 1].iter().zip(&self.outputs[k]).map(|(a, b)| a + (b - a) * th).collect())
    }

    /// CSV with header `t, y1_re, y1_im, ...`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["t".to_string()];
        for i in 1..=self.channels() {
            header.push(format!("y{i}_re"));
            header.push(format!("y{i}_im"));
        }
        let rows: Vec<Vec<f64>> = self
            .times
            .iter()
            .zip(&self.outputs)
            .map(|(t, y)| std::iter::once(*t).chain(y.iter().flat_map(|z| [z.re, z.im])).collect())
            .collect();
        write_csv(path, &header, &rows)
    }
}

/// `A` as compressed rows when it is sparse enough to pay off.
enum Operator {
    Dense(CMat),
    Sparse { ptr: Vec<usize>, col: Vec<usize>, val: Vec<C64>, n: usize },
}

impl Operator {
    fn new(a: &CMat) -> Self {
        let n = a.nrows();
        let nnz = a.iter().filter(|z| z.re != 0.0 || z.im != 0.0).count();
        if nnz * 4 > n * n {
            return Operator::Dense(a.clone());
        }
        let (mut ptr, mut col, mut val) = (vec![0], Vec::with_capacity(nnz), Vec::with_capacity(nnz));
        for i in 0..n {
            for j in 0..n {
                let z = a[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    col.push(j);
                    val.push(z);
                }
            }
            ptr.push(col.len());
        }
        Operator::Sparse { ptr, col, val, n }
    }

    fn apply(&self, x: &CMat, out: &mut CMat) {
        match self {
            Operator::Dense(a) => out.gemm(C64::new(1.0, 0.0), a, x, C64::new(0.0, 0.0)),
            Operator::Sparse { ptr, col, val, n } => {
                for k in 0..x.ncols() {
                    for i in 0..*n {
                        let mut s = C64::new(0.0, 0.0);
                        for p in ptr[i]..ptr[i + 1] {
                            s += val[p] * x[(col[p], k)];
                        }
                        out[(i, k)] = s;
                    }
                }
            }
        }
    }
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Simulates `x′ = Ax + Bu, y = Cx` from `x(0) = 0` on `[0, t_final]`.
///
/// An impulse is realized as `x(0⁺) = B` with zero input.
pub fn simulate(sys: &LtiSystem, input: &InputSignal, t_final: f64, opts: &SimOptions) -> Result<Trajectory> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
    }
    if !(opts.rel_tol > 0.0 && opts.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("integrator tolerances must be positive".into()));
    }
    let m = sys.inputs();
    input.check(m)?;
    let op = Operator::new(sys.a());
    let b = sys.b();
    let (mut x, forced) = match input {
        InputSignal::Impulse => (b.clone(), false),
        _ => (CMat::zeros(sys.order(), 1), true),
    };
    let rhs = |t: f64, x: &CMat, out: &mut CMat| {
        op.apply(x, out);
        if forced {
            *out += b * input.value(t, m);
        }
    };

    let mut stops: Vec<f64> = opts.stops.iter().copied().filter(|&s| s > 0.0 && s < t_final).collect();
    if let InputSignal::Samples { times, .. } = input {
        stops.extend(times.iter().copied().filter(|&s| s > 0.0 && s < t_final));
    }
    stops.push(t_final);
    stops.sort_by(f64::total_cmp);
    stops.dedup();

    let out = |x: &CMat| -> Vec<C64> { (sys.c() * x).iter().copied().collect() };
    let mut traj = Trajectory { times: vec![0.0], outputs: vec![out(&x)] };
    let h_min = 1e-14 * t_final;
    let scale = |x: &CMat| opts.abs_tol.max(opts.rel_tol * max_abs(x));

    let shape = x.shape();
    let mut k1 = CMat::zeros(shape.0, shape.1);
    let (mut k2, mut k3, mut k4) = (k1.clone(), k1.clone(), k1.clone());
    rhs(0.0, &x, &mut k1);
    let d0 = max_abs(&x).max(opts.abs_tol);
    let d1 = max_abs(&k1).max(f64::MIN_POSITIVE);
    let mut h = (0.01 * d0 / d1).min(1e-3 * t_final).max(10.0 * h_min);
    let mut t = 0.0;
    let mut err_prev: f64 = 1e-4;
    let mut next_stop = 0;

    while t < t_final {
        let target = stops[next_stop];
        let mut landing = false;
        if t + h >= target * (1.0 - 4.0 * f64::EPSILON) {
            h = target - t;
            landing = true;
        }
        if h < h_min {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        let c = |v: f64| C64::new(v, 0.0);
        rhs(t + 0.5 * h, &(&x + &k1 * c(0.5 * h)), &mut k2);
        rhs(t + 0.75 * h, &(&x + &k2 * c(0.75 * h)), &mut k3);
        let x_new = &x + (&k1 * c(2.0 / 9.0) + &k2 * c(1.0 / 3.0) + &k3 * c(4.0 / 9.0)) * c(h);
        let t_new = if landing { target } else { t + h };
        rhs(t_new, &x_new, &mut k4);
        let e = (&k1 * c(-5.0 / 72.0) + &k2 * c(1.0 / 12.0) + &k3 * c(1.0 / 9.0) + &k4 * c(-1.0 / 8.0)) * c(h);
        let err = max_abs(&e) / scale(&x).max(scale(&x_new));
        if !err.is_finite() {
            return Err(Error::StepSizeUnderflow { t, h });
        }
        if err <= 1.0 {
            t = t_new;
            x = x_new;
            std::mem::swap(&mut k1, &mut k4);
            if landing || !opts.record_stops_only {
                traj.times.push(t);
                traj.outputs.push(out(&x));
            }
            if landing {
                next_stop += 1;
            }
            let err = err.max(1e-10);
            let fac = 0.9 * err.powf(-0.7 / 3.0) * err_prev.powf(0.4 / 3.0);
            h *= fac.clamp(0.2, 5.0);
            err_prev = err;
        } else {
            h *= (0.9 * err.powf(-1.0 / 3.0)).max(0.2);
        }
    }
    Ok(traj)
}

/// `count + 1` equally spaced times on `[0, t_final]`.
pub fn uniform_times(t_final: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|k| t_final * k as f64 / count.max(1) as f64).collect()
}

/// Normalization of [`output_relative_error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorNormalization {
    /// `‖y(t) − y_r(t)‖ / max_t ‖y(t)‖`.
    #[default]
    MaxNorm,
    /// `‖y(t) − y_r(t)‖ / ‖y(t)‖`; spikes where the reference vanishes.
    Pointwise,
}

/// Relative output error on the reference time grid; `test` is resampled
/// by linear interpolation.
pub fn output_relative_error(reference: &Trajectory, test: &Trajectory, mode: ErrorNormalization) -> Result<Vec<f64>> {
    if reference.times.is_empty() || test.times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if reference.channels() != test.channels() {
        return Err(Error::DimensionMismatch(format!(
            "trajectories have {} and {} output channels",
            reference.channels(),
            test.channels()
        )));
    }
    let norm = |v: &[C64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let peak = reference.outputs.iter().map(|y| norm(y)).fold(0.0, f64::max);
    reference
        .times
        .iter()
        .zip(&reference.outputs)
        .map(|(&t, y)| {
            let yt = test.sample(t)?;
            let diff: Vec<C64> = y.iter().zip(&yt).map(|(a, b)| a - b).collect();
            let d = norm(&diff);
            let den = match mode {
                ErrorNormalization::MaxNorm => peak,
                ErrorNormalization::Pointwise => norm(y),
            };
            Ok(if d == 0.0 { 0.0 } else { d / den })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{BenchmarkKind, BenchmarkSpec};
    use crate::linalg::c64;

    fn scalar() -> LtiSystem {
        let one = CMat::from_element(1, 1, c64(1.0, 0.0));
        LtiSystem::new(-one.clone(), one.clone(), one).unwrap()
    }

    /// `y(t) = C ∫₀ᵗ e^{A(t−s)} B ds` from the exponential of an augmented
    /// block matrix.
    fn step_oracle(sys: &LtiSystem, t: f64) -> Vec<C64> {
        let (n, m) = (sys.order(), sys.inputs());
        let mut big = CMat::zeros(n + m, n + m);
        big.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * c64(t, 0.0)));
        big.view_mut((0, n), (n, m)).copy_from(&(sys.b() * c64(t, 0.0)));
        let e = big.exp();
        let xb = e.view((0, n), (n, m)).into_owned();
        (sys.c() * xb * CMat::from_element(m, 1, c64(1.0, 0.0))).iter().copied().collect()
    }

    #[test]
    fn impulse_of_first_order_lag() {
        let tr = simulate(&scalar(), &InputSignal::Impulse, 5.0, &SimOptions::default()).unwrap();
        assert_eq!(tr.times[0], 0.0);
        assert_eq!(*tr.times.last().unwrap(), 5.0);
        assert!(tr.times.windows(2).all(|w| w[0] < w[1]));
        for (t, y) in tr.times.iter().zip(&tr.outputs) {
            assert!((y[0] - c64((-t).exp(), 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let sig = InputSignal::samples(vec![0.0, 1.0], vec![vec![c64(0.0, 0.0)], vec![c64(0.0, 0.0)]]).unwrap();
        let tr = simulate(&scalar(), &sig, 2.0, &SimOptions::default()).unwrap();
        assert!(tr.outputs.iter().all(|y| y[0] == c64(0.0, 0.0)));
    }

    #[test]
    fn step_matches_exponential_oracle() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Schrodinger, 40).unwrap().build().unwrap();
        let checkpoints: Vec<f64> = (1..=10).map(|k| 0.01 * k as f64).collect();
        let opts = SimOptions { stops: checkpoints.clone(), ..SimOptions::default() };
        let tr = simulate(&sys, &InputSignal::Step, 0.1, &opts).unwrap();
        assert_eq!(tr.channels(), 2);
        for &t in &checkpoints {
            let i = tr.times.iter().position(|&s| s == t).expect("checkpoint hit");
            let want = step_oracle(&sys, t);
            let wn = want.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let d = want.iter().zip(&tr.outputs[i]).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(d <= 1e-5 * wn, "t={t}: {d} vs {wn}");
        }
    }

    #[test]
    fn relative_error_modes() {
        let a = simulate(&scalar(), &InputSignal::Impulse, 1.0, &SimOptions::default()).unwrap();
        assert!(output_relative_error(&a, &a, ErrorNormalization::MaxNorm).unwrap().iter().all(|&e| e == 0.0));
        let mut twice = a.clone();
        twice.outputs.iter_mut().for_each(|y| y[0] *= 2.0);
        let e = output_relative_error(&a, &twice, ErrorNormalization::MaxNorm).unwrap();
        for (y, ei) in a.outputs.iter().zip(&e) {
            assert!((ei - y[0].norm()).abs() < 1e-14);
        }
        let p = output_relative_error(&a, &twice, ErrorNormalization::Pointwise).unwrap();
        assert!(p.iter().all(|&e| (e - 1.0).abs() < 1e-14));
        let empty = Trajectory { times: vec![], outputs: vec![] };
        assert!(matches!(output_relative_error(&empty, &a, ErrorNormalization::MaxNorm), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn wave_energy_is_conserved() {
        let n = 60;
        let sys = BenchmarkSpec::new(BenchmarkKind::Wave, n).unwrap().build().unwrap();
        let k = n / 2;
        let neg_lap = -sys.a().view((k, 0), (k, k)).into_owned();
        let first = CMat::from_column_slice(n, 1, sys.b().column(0).as_slice());
        let state = LtiSystem::new(sys.a().clone(), first, CMat::identity(n, n)).unwrap();
        let tr = simulate(&state, &InputSignal::Impulse, 5.0, &SimOptions::default()).unwrap();
        let energy = |y: &[C64]| {
            let w = CMat::from_column_slice(k, 1, &y[..k]);
            let v = CMat::from_column_slice(k, 1, &y[k..]);
            v.norm_squared() + (w.adjoint() * &neg_lap * &w)[(0, 0)].re
        };
        let e0 = energy(&tr.outputs[0]);
        let drift = tr.outputs.iter().map(|y| (energy(y) - e0).abs()).fold(0.0, f64::max);
        assert!(drift <= 1e-4 * e0, "{drift} vs {e0}");
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(simulate(&scalar(), &InputSignal::Step, 0.0, &SimOptions::default()).is_err());
        let opts = SimOptions { rel_tol: 0.0, ..SimOptions::default() };
        assert!(simulate(&scalar(), &InputSignal::Step, 1.0, &opts).is_err());
        assert!(InputSignal::samples(vec![1.0, 0.5], vec![vec![], vec![]]).is_err());
        let two = InputSignal::samples(vec![0.0], vec![vec![c64(1.0, 0.0); 2]]).unwrap();
        assert!(matches!(simulate(&scalar(), &two, 1.0, &SimOptions::default()), Err(Error::DimensionMismatch(_))));
    }

    fn at_stops(sys: &LtiSystem, input: &InputSignal, stops: &[f64]) -> Vec<Vec<C64>> {
        let opts = SimOptions { rel_tol: 1e-10, abs_tol: 1e-14, stops: stops.to_vec(), record_stops_only: true };
        simulate(sys, input, *stops.last().unwrap(), &opts).unwrap().outputs
    }

    #[test]
    fn superposition() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Schrodinger, 20).unwrap().build().unwrap();
        let times = vec![0.0, 0.3, 0.7, 1.0];
        let u: Vec<Vec<C64>> = vec![
            vec![c64(1.0, 0.0), c64(0.0, 1.0)],
            vec![c64(0.5, 0.0), c64(2.0, 0.0)],
            vec![c64(-1.0, 0.5), c64(0.0, 0.0)],
            vec![c64(0.0, 0.0), c64(1.0, -1.0)],
        ];
        let v: Vec<Vec<C64>> = vec![vec![c64(0.0, 2.0), c64(1.0, 0.0)]; 4];
        let (a, b) = (c64(2.0, -1.0), c64(-0.5, 0.0));
        let combo = u.iter().zip(&v).map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect()).collect();
        let stops = [0.25, 0.5, 1.0, 1.5];
        let yu = at_stops(&sys, &InputSignal::samples(times.clone(), u).unwrap(), &stops);
        let yv = at_stops(&sys, &InputSignal::samples(times.clone(), v).unwrap(), &stops);
        let yc = at_stops(&sys, &InputSignal::samples(times, combo).unwrap(), &stops);
        let scale = yc.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max);
        for ((pu, pv), pc) in yu.iter().zip(&yv).zip(&yc) {
            for ((x, y), z) in pu.iter().zip(pv).zip(pc) {
                assert!((a * x + b * y - z).norm() <= 1e-7 * scale);
            }
        }
    }

    #[test]
    fn tighter_tolerance_shrinks_error() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Heat, 20).unwrap().build().unwrap();
        let exact = step_oracle(&sys, 0.01);
        let mut last = f64::INFINITY;
        for tol in [1e-4, 1e-6, 1e-8] {
            let opts = SimOptions { rel_tol: tol, abs_tol: tol * 1e-4, stops: vec![0.01], record_stops_only: true };
            let y = simulate(&sys, &InputSignal::Step, 0.01, &opts).unwrap();
            let err = (y.outputs.last().unwrap()[0] - exact[0]).norm() / exact[0].norm();
            assert!(err < last, "tol {tol}: {err} after {last}");
            last = err;
        }
        assert!(last < 1e-5, "{last}");
    }
}
