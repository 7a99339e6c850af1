//! Manufactured solutions `u` with forcing `f = i ∂_t u − ν Δu`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::assembly::SpaceTimeFunction;
use crate::C64;

const I: C64 = C64::new(0.0, 1.0);

/// Exact solution of a model problem and its forcing term.
pub trait ManufacturedSolution: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn final_time(&self) -> f64;
    fn nu(&self) -> f64;
    fn u(&self, t: f64, x: &[f64]) -> C64;
    fn f(&self, t: f64, x: &[f64]) -> C64;

    /// True when the boundary and initial traces of `u` vanish.
    fn homogeneous(&self) -> bool;

    /// Named parameters for reports.
    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![]
    }

    /// `u` on a spatial tensor grid at time `t` (first axis fastest).
    fn u_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        (|t: f64, x: &[f64]| self.u(t, x)).eval_slab(t, axes, out)
    }

    fn f_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        (|t: f64, x: &[f64]| self.f(t, x)).eval_slab(t, axes, out)
    }
}

/// `u` of a manufactured solution as a space-time function.
pub struct Exact<'a, M: ?Sized>(pub &'a M);

/// `f` of a manufactured solution as a space-time function.
pub struct Forcing<'a, M: ?Sized>(pub &'a M);

impl<M: ManufacturedSolution + ?Sized> SpaceTimeFunction for Exact<'_, M> {
    fn eval(&self, t: f64, x: &[f64]) -> C64 {
        self.0.u(t, x)
    }
    fn eval_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        self.0.u_slab(t, axes, out)
    }
}

impl<M: ManufacturedSolution + ?Sized> SpaceTimeFunction for Forcing<'_, M> {
    fn eval(&self, t: f64, x: &[f64]) -> C64 {
        self.0.f(t, x)
    }
    fn eval_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        self.0.f_slab(t, axes, out)
    }
}

/// Spreading Gaussian `u = αβ (β² − iγt)^{-1/2} exp(−x² / (β² − iγt))` on
/// `(0,2) × (0,1)`; boundary and initial data are nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPulse {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub nu: f64,
    pub t_final: f64,
}

pub fn gaussian_1d() -> GaussianPulse {
    GaussianPulse {
        alpha: 1.5,
        beta: 1.5,
        gamma: 2.5,
        nu: 1.0,
        t_final: 2.0,
    }
}

impl GaussianPulse {
    fn z(&self, t: f64) -> C64 {
        C64::new(self.beta * self.beta, -self.gamma * t)
    }
}

impl ManufacturedSolution for GaussianPulse {
    fn name(&self) -> &str {
        "gaussian1d"
    }
    fn dim(&self) -> usize {
        1
    }
    fn final_time(&self) -> f64 {
        self.t_final
    }
    fn nu(&self) -> f64 {
        self.nu
    }
    fn homogeneous(&self) -> bool {
        false
    }
    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)]
    }

    fn u(&self, t: f64, x: &[f64]) -> C64 {
        let z = self.z(t);
        self.alpha * self.beta / z.sqrt() * (-x[0] * x[0] / z).exp()
    }

    fn f(&self, t: f64, x: &[f64]) -> C64 {
        let z = self.z(t);
        let x2 = x[0] * x[0];
        let u = self.u(t, x);
        let dt_term = self.gamma * (-0.5 / z + x2 / (z * z));
        let lap = 4.0 * x2 / (z * z) - 2.0 / z;
        u * (dt_term - self.nu * lap)
    }
}

/// Truncated superposition of `M` Dirichlet eigenmodes
/// `u = Σ_k (−it/k) e^{iω_k² t} e_k(x)`, `e_k = √2 sin(kπx)`, `ω_k = kπ`, on
/// `(0,2) × (0,1)` with homogeneous data.
#[derive(Debug, Clone, PartialEq)]
pub struct HighMode {
    pub modes: usize,
    pub nu: f64,
    pub t_final: f64,
}

pub fn high_mode_1d(modes: usize) -> HighMode {
    HighMode {
        modes: modes.max(1),
        nu: 1.0,
        t_final: 2.0,
    }
}

impl HighMode {
    fn omega2(k: usize) -> f64 {
        let w = k as f64 * PI;
        w * w
    }

    /// Time coefficients of `u` (`which = 0`) or `f` (`which = 1`).
    fn coefficients(&self, t: f64, which: u8) -> Vec<C64> {
        (1..=self.modes)
            .map(|k| {
                let w2 = Self::omega2(k);
                let kf = k as f64;
                let phase = C64::from_polar(1.0, w2 * t);
                let amp = if which == 0 {
                    C64::new(0.0, -t / kf)
                } else {
                    C64::new(1.0 / kf, t * w2 * (1.0 - self.nu) / kf)
                };
                amp * phase
            })
            .collect()
    }

    /// `Σ_k c_k √2 sin(kπx)` at each `x`, with the sines from the
    /// three-term recurrence `s_{k+1} = 2 cos(πx) s_k − s_{k−1}`.
    fn mode_sum(coeffs: &[C64], xs: &[f64], out: &mut [C64]) {
        let eval = |x: f64| {
            let s1 = (PI * x).sin();
            let two_c = 2.0 * (PI * x).cos();
            let (mut prev, mut cur) = (0.0, s1);
            let mut acc = C64::new(0.0, 0.0);
            for &c in coeffs {
                acc += c * cur;
                let next = two_c * cur - prev;
                prev = cur;
                cur = next;
            }
            acc * std::f64::consts::SQRT_2
        };
        if xs.len() >= 256 {
            out.par_iter_mut().zip(xs).for_each(|(o, &x)| *o = eval(x));
        } else {
            out.iter_mut().zip(xs).for_each(|(o, &x)| *o = eval(x));
        }
    }
}

impl ManufacturedSolution for HighMode {
    fn name(&self) -> &str {
        "highmode1d"
    }
    fn dim(&self) -> usize {
        1
    }
    fn final_time(&self) -> f64 {
        self.t_final
    }
    fn nu(&self) -> f64 {
        self.nu
    }
    fn homogeneous(&self) -> bool {
        true
    }
    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("modes", self.modes as f64)]
    }

    fn u(&self, t: f64, x: &[f64]) -> C64 {
        let mut out = [C64::new(0.0, 0.0)];
        Self::mode_sum(&self.coefficients(t, 0), &x[..1], &mut out);
        out[0]
    }

    fn f(&self, t: f64, x: &[f64]) -> C64 {
        let mut out = [C64::new(0.0, 0.0)];
        Self::mode_sum(&self.coefficients(t, 1), &x[..1], &mut out);
        out[0]
    }

    fn u_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        Self::mode_sum(&self.coefficients(t, 0), axes[0], out)
    }

    fn f_slab(&self, t: f64, axes: &[&[f64]], out: &mut [C64]) {
        Self::mode_sum(&self.coefficients(t, 1), axes[0], out)
    }
}

/// `u = a exp(−i(|x|² + t²)/ω²)` on `(0,1) × (0,1)^d` with nonhomogeneous
/// boundary and initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct TravelingWave {
    pub omega: f64,
    pub amplitude: f64,
    pub nu: f64,
    pub d: usize,
    pub t_final: f64,
}

pub fn traveling_wave_2d() -> TravelingWave {
    traveling_wave(2, 0.2)
}

/// Wave in `d` dimensions with amplitude `(2/ω²)^{1/4}`.
pub fn traveling_wave(d: usize, omega: f64) -> TravelingWave {
    TravelingWave {
        omega,
        amplitude: (2.0 / (omega * omega)).powf(0.25),
        nu: 1.0,
        d,
        t_final: 1.0,
    }
}

impl ManufacturedSolution for TravelingWave {
    fn name(&self) -> &str {
        match self.d {
            1 => "wave1d",
            2 => "wave2d",
            _ => "wave3d",
        }
    }
    fn dim(&self) -> usize {
        self.d
    }
    fn final_time(&self) -> f64 {
        self.t_final
    }
    fn nu(&self) -> f64 {
        self.nu
    }
    fn homogeneous(&self) -> bool {
        false
    }
    fn parameters(&self) -> Vec<(&'static str, f64)> {
        vec![("omega", self.omega), ("amplitude", self.amplitude)]
    }

    fn u(&self, t: f64, x: &[f64]) -> C64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let w2 = self.omega * self.omega;
        self.amplitude * (-I * (r2 + t * t) / w2).exp()
    }

    fn f(&self, t: f64, x: &[f64]) -> C64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let w2 = self.omega * self.omega;
        let factor = C64::new(2.0 * t / w2 + self.nu * 4.0 * r2 / (w2 * w2), self.nu * 2.0 * self.d as f64 / w2);
        self.u(t, x) * factor
    }
}

/// Problem by command-line name: `gaussian1d`, `highmode1d`, `wave2d`.
pub fn by_name(name: &str, modes: usize) -> Option<Box<dyn ManufacturedSolution>> {
    match name {
        "gaussian1d" => Some(Box::new(gaussian_1d())),
        "highmode1d" => Some(Box::new(high_mode_1d(modes))),
        "wave2d" => Some(Box::new(traveling_wave_2d())),
        "wave1d" => Some(Box::new(traveling_wave(1, 0.2))),
        _ => None,
    }
}

/// `i ∂_t u − ν Δu` by fourth-order central differences with step `h`.
pub fn schrodinger_by_differences<M: ManufacturedSolution + ?Sized>(m: &M, t: f64, x: &[f64], h: f64) -> C64 {
    let stencil1 = |g: &dyn Fn(f64) -> C64, s: f64| (g(s - 2.0 * h) - 8.0 * g(s - h) + 8.0 * g(s + h) - g(s + 2.0 * h)) / (12.0 * h);
    let stencil2 =
        |g: &dyn Fn(f64) -> C64, s: f64| (-g(s - 2.0 * h) + 16.0 * g(s - h) - 30.0 * g(s) + 16.0 * g(s + h) - g(s + 2.0 * h)) / (12.0 * h * h);
    let dt = stencil1(&|s| m.u(s, x), t);
    let mut lap = C64::new(0.0, 0.0);
    for l in 0..x.len() {
        let g = |s: f64| {
            let mut y = x.to_vec();
            y[l] = s;
            m.u(t, &y)
        };
        lap += stencil2(&g, x[l]);
    }
    I * dt - m.nu() * lap
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_initial_peak() {
        let g = gaussian_1d();
        assert!((g.u(0.0, &[0.0]) - C64::new(1.5, 0.0)).norm() < 1e-15);
        assert!(g.z(0.0).norm() >= 2.25 && g.z(2.0).norm() >= 2.25);
    }

    #[test]
    fn gaussian_forcing_matches_differences() {
        let g = gaussian_1d();
        let fd = schrodinger_by_differences(&g, 1.0, &[0.5], 1e-3);
        let f = g.f(1.0, &[0.5]);
        assert!((fd - f).norm() <= 1e-6 * f.norm(), "{fd} vs {f}");
    }

    #[test]
    fn high_mode_vanishes_initially_and_sums_correctly() {
        let h = high_mode_1d(7);
        assert_eq!(h.u(0.0, &[0.3]).norm(), 0.0);
        let (t, x) = (0.4, 0.37);
        let direct: C64 = (1..=7)
            .map(|k| {
                let kf = k as f64;
                let w2 = (kf * PI).powi(2);
                C64::new(1.0 / kf, 0.0) * C64::from_polar(1.0, w2 * t) * (2f64.sqrt() * (kf * PI * x).sin())
            })
            .sum();
        assert!((h.f(t, &[x]) - direct).norm() < 1e-12);
    }

    #[test]
    fn wave_amplitude_and_modulus() {
        let w = traveling_wave_2d();
        assert!((w.amplitude - 50f64.powf(0.25)).abs() < 1e-14);
        assert!((w.amplitude - 2.6591).abs() < 1e-4);
        assert!((w.u(0.3, &[0.4, 0.7]).norm() - w.amplitude).abs() < 1e-13);
        let fd = schrodinger_by_differences(&w, 0.3, &[0.4, 0.7], 1e-4);
        let f = w.f(0.3, &[0.4, 0.7]);
        assert!((fd - f).norm() <= 1e-6 * f.norm(), "{fd} vs {f}");
    }

    #[test]
    fn names_resolve() {
        for n in ["gaussian1d", "highmode1d", "wave2d"] {
            assert_eq!(by_name(n, 5).unwrap().name(), n);
        }
        assert!(by_name("nope", 5).is_none());
    }
}
