//! Plane-strain elasticity with a tension/compression eigen split of the strain,
//! the degradation and softening functions of the damage model, and derived
//! material quantities.

use serde::{Deserialize, Serialize};

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("invalid material parameter: {0}")]
    InvalidParameter(String),
    #[error("damage {0} outside [0, 1]")]
    DamageOutOfRange(f64),
}

/// Degradation of the tensile energy, `g(0) = 1`, `g(1) = 0`, convex on [0, 1].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradation {
    /// `(1 - d)^2 + 0.1 (1 - d) d^3`
    #[default]
    QuadraticCubic,
}

impl Degradation {
    #[inline]
    pub fn value(self, d: f64) -> f64 {
        match self {
            Degradation::QuadraticCubic => {
                let s = 1.0 - d;
                s * s + 0.1 * s * d * d * d
            }
        }
    }

    #[inline]
    pub fn derivative(self, d: f64) -> f64 {
        match self {
            Degradation::QuadraticCubic => -2.0 * (1.0 - d) + 0.3 * d * d - 0.4 * d * d * d,
        }
    }

    #[inline]
    pub fn second_derivative(self, d: f64) -> f64 {
        match self {
            Degradation::QuadraticCubic => 2.0 + 0.6 * d - 1.2 * d * d,
        }
    }
}

/// Softening function, `h(0) = 0`, `h'(0) = 2`, convex.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Softening {
    /// `2 d + 3 d^2`
    #[default]
    Quadratic,
}

impl Softening {
    #[inline]
    pub fn value(self, d: f64) -> f64 {
        match self {
            Softening::Quadratic => 2.0 * d + 3.0 * d * d,
        }
    }

    #[inline]
    pub fn derivative(self, d: f64) -> f64 {
        match self {
            Softening::Quadratic => 2.0 + 6.0 * d,
        }
    }

    #[inline]
    pub fn second_derivative(self, _d: f64) -> f64 {
        match self {
            Softening::Quadratic => 6.0,
        }
    }
}

fn check_damage(d: f64) -> Result<f64, ConstitutiveError> {
    if (0.0..=1.0).contains(&d) {
        Ok(d)
    } else {
        Err(ConstitutiveError::DamageOutOfRange(d))
    }
}

pub fn g(d: f64) -> Result<f64, ConstitutiveError> {
    Ok(Degradation::default().value(check_damage(d)?))
}

pub fn g_prime(d: f64) -> Result<f64, ConstitutiveError> {
    Ok(Degradation::default().derivative(check_damage(d)?))
}

pub fn h(d: f64) -> Result<f64, ConstitutiveError> {
    Ok(Softening::default().value(check_damage(d)?))
}

pub fn h_prime(d: f64) -> Result<f64, ConstitutiveError> {
    Ok(Softening::default().derivative(check_damage(d)?))
}

/// Lamé constants `(lambda, mu)` under plane strain.
pub fn lame_plane_strain(youngs_modulus: f64, poisson_ratio: f64) -> Result<(f64, f64), ConstitutiveError> {
    if !(youngs_modulus > 0.0) {
        return Err(ConstitutiveError::InvalidParameter(format!(
            "Young's modulus must be positive, got {youngs_modulus}"
        )));
    }
    if !(0.0..0.5).contains(&poisson_ratio) {
        return Err(ConstitutiveError::InvalidParameter(format!(
            "Poisson ratio must lie in [0, 0.5), got {poisson_ratio}"
        )));
    }
    let (e, nu) = (youngs_modulus, poisson_ratio);
    Ok((e * nu / (1.0 + nu) / (1.0 - 2.0 * nu), e / 2.0 / (1.0 + nu)))
}

/// Critical energy density from the fracture energy: `Gc = 4 Yc l`.
pub fn yc_from_gc(fracture_energy: f64, length_scale: f64) -> Result<f64, ConstitutiveError> {
    if !(fracture_energy > 0.0) || !(length_scale > 0.0) {
        return Err(ConstitutiveError::InvalidParameter(format!(
            "Gc and l must be positive, got Gc = {fracture_energy}, l = {length_scale}"
        )));
    }
    Ok(fracture_energy / (4.0 * length_scale))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveSpeeds {
    pub dilatational: f64,
    pub shear: f64,
    pub rayleigh: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    /// Critical energy density `Yc` (J/m^3).
    pub critical_energy: f64,
    /// Lipschitz regularizing length `l` (m).
    pub length_scale: f64,
    pub lambda: f64,
    pub mu: f64,
    pub degradation: Degradation,
    pub softening: Softening,
}

impl MaterialParams {
    pub fn new(
        youngs_modulus: f64,
        poisson_ratio: f64,
        density: f64,
        critical_energy: f64,
        length_scale: f64,
    ) -> Result<Self, ConstitutiveError> {
        let (lambda, mu) = lame_plane_strain(youngs_modulus, poisson_ratio)?;
        for (name, v) in [
            ("density", density),
            ("critical energy Yc", critical_energy),
            ("length scale l", length_scale),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConstitutiveError::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(Self {
            youngs_modulus,
            poisson_ratio,
            density,
            critical_energy,
            length_scale,
            lambda,
            mu,
            degradation: Degradation::default(),
            softening: Softening::default(),
        })
    }

    /// Same as [`MaterialParams::new`] with `Yc` derived from `Gc`.
    pub fn from_fracture_energy(
        youngs_modulus: f64,
        poisson_ratio: f64,
        density: f64,
        fracture_energy: f64,
        length_scale: f64,
    ) -> Result<Self, ConstitutiveError> {
        let yc = yc_from_gc(fracture_energy, length_scale)?;
        Self::new(youngs_modulus, poisson_ratio, density, yc, length_scale)
    }

    pub fn wave_speeds(&self) -> WaveSpeeds {
        let c_d = ((self.lambda + 2.0 * self.mu) / self.density).sqrt();
        let c_s = (self.mu / self.density).sqrt();
        let nu = self.poisson_ratio;
        WaveSpeeds {
            dilatational: c_d,
            shear: c_s,
            rayleigh: (0.862 + 1.14 * nu) / (1.0 + nu) * c_s,
        }
    }
}

pub fn wave_speeds(params: &MaterialParams) -> WaveSpeeds {
    params.wave_speeds()
}

/// Symmetric small-strain tensor; `xy` is the tensor (not engineering) shear.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Strain2D {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Strain2D {
    pub const ZERO: Strain2D = Strain2D { xx: 0.0, yy: 0.0, xy: 0.0 };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Double contraction `a : b`.
    pub fn ddot(&self, other: &Strain2D) -> f64 {
        self.xx * other.xx + self.yy * other.yy + 2.0 * self.xy * other.xy
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Strain2D {
        Strain2D::new(s * self.xx, s * self.yy, s * self.xy)
    }

    pub fn add(&self, o: &Strain2D) -> Strain2D {
        Strain2D::new(self.xx + o.xx, self.yy + o.yy, self.xy + o.xy)
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.xx + self.yy);
        let r = (0.5 * (self.xx - self.yy)).hypot(self.xy);
        [m + r, m - r]
    }
}

/// Symmetric 2x2 stress tensor (Pa); same layout as [`Strain2D`].
pub type Stress2D = Strain2D;

/// Tensile / compressive parts of a strain and the matching energy densities.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StrainSplit {
    pub eps_plus: Strain2D,
    pub eps_minus: Strain2D,
    /// `<tr eps>+`
    pub trace_plus: f64,
    /// `<tr eps>-`
    pub trace_minus: f64,
    /// Undamaged tensile energy density (J/m^3).
    pub e_plus: f64,
    /// Compressive energy density (J/m^3).
    pub e_minus: f64,
}

#[inline]
fn pos(p: f64) -> f64 {
    0.5 * (p + p.abs())
}

#[inline]
fn neg(p: f64) -> f64 {
    0.5 * (p - p.abs())
}

/// Eigen split of `eps` into tensile and compressive modes.
pub fn eigen_split(eps: &Strain2D, lambda: f64, mu: f64) -> StrainSplit {
    let m = 0.5 * (eps.xx + eps.yy);
    let half_diff = 0.5 * (eps.xx - eps.yy);
    let r = half_diff.hypot(eps.xy);
    let scale = eps.xx.abs() + eps.yy.abs() + eps.xy.abs();
    let (l1, l2) = (m + r, m - r);

    let (eps_plus, eps_minus) = if r <= 1e-14 * scale || r == 0.0 {
        // coalesced eigenvalues: any basis works
        let p = pos(m);
        let n = neg(m);
        (Strain2D::new(p, p, 0.0), Strain2D::new(n, n, 0.0))
    } else {
        // projector on the first eigenvector: (I + (eps - m I) / r) / 2
        let p1 = Strain2D::new(0.5 * (1.0 + half_diff / r), 0.5 * (1.0 - half_diff / r), 0.5 * eps.xy / r);
        let p2 = Strain2D::new(1.0 - p1.xx, 1.0 - p1.yy, -p1.xy);
        (
            p1.scaled(pos(l1)).add(&p2.scaled(pos(l2))),
            p1.scaled(neg(l1)).add(&p2.scaled(neg(l2))),
        )
    };

    let tr = eps.trace();
    let (tp, tm) = (pos(tr), neg(tr));
    let e_plus = 0.5 * lambda * tp * tp + mu * (pos(l1).powi(2) + pos(l2).powi(2));
    let e_minus = 0.5 * lambda * tm * tm + mu * (neg(l1).powi(2) + neg(l2).powi(2));
    StrainSplit {
        eps_plus,
        eps_minus,
        trace_plus: tp,
        trace_minus: tm,
        e_plus,
        e_minus,
    }
}

/// Free energy density `g(d) e+ + e-`.
pub fn free_energy(split: &StrainSplit, d: f64, params: &MaterialParams) -> Result<f64, ConstitutiveError> {
    check_damage(d)?;
    Ok(free_energy_unchecked(split, d, params))
}

#[inline]
pub(crate) fn free_energy_unchecked(split: &StrainSplit, d: f64, params: &MaterialParams) -> f64 {
    params.degradation.value(d) * split.e_plus + split.e_minus
}

/// Stress `d psi / d eps`.
pub fn stress(split: &StrainSplit, d: f64, params: &MaterialParams) -> Result<Stress2D, ConstitutiveError> {
    check_damage(d)?;
    Ok(stress_unchecked(split, d, params))
}

#[inline]
pub(crate) fn stress_unchecked(split: &StrainSplit, d: f64, params: &MaterialParams) -> Stress2D {
    let (lambda, mu) = (params.lambda, params.mu);
    let gd = params.degradation.value(d);
    let sp = split.eps_plus.scaled(2.0 * mu);
    let sm = split.eps_minus.scaled(2.0 * mu);
    let p = gd * lambda * split.trace_plus + lambda * split.trace_minus;
    Stress2D::new(
        gd * sp.xx + sm.xx + p,
        gd * sp.yy + sm.yy + p,
        gd * sp.xy + sm.xy,
    )
}

/// Damage driving force `Y = -d psi / d d = -g'(d) e+`.
pub fn driving_energy(split: &StrainSplit, d: f64, params: &MaterialParams) -> Result<f64, ConstitutiveError> {
    check_damage(d)?;
    Ok(-params.degradation.derivative(d) * split.e_plus)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn concrete() -> MaterialParams {
        MaterialParams::from_fracture_energy(32e9, 0.2, 2450.0, 3.0, 1.25e-3).unwrap()
    }

    #[test]
    fn lame_values() {
        let (l, m) = lame_plane_strain(32e9, 0.2).unwrap();
        assert_relative_eq!(l, 8.888_888_888_9e9, max_relative = 1e-10);
        assert_relative_eq!(m, 13.333_333_333_3e9, max_relative = 1e-10);
        let (l, m) = lame_plane_strain(1.0, 0.0).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(m, 0.5);
        let (l, m) = lame_plane_strain(190e9, 0.3).unwrap();
        assert_relative_eq!(l, 109.615_384_615e9, max_relative = 1e-10);
        assert_relative_eq!(m, 73.076_923_077e9, max_relative = 1e-10);
        assert!(lame_plane_strain(1.0, 0.5).is_err());
        assert!(lame_plane_strain(-1.0, 0.2).is_err());
    }

    #[test]
    fn degradation_and_softening_values() {
        assert_eq!(g(0.0).unwrap(), 1.0);
        assert_eq!(g(1.0).unwrap(), 0.0);
        assert_eq!(h(0.0).unwrap(), 0.0);
        assert_eq!(h_prime(0.0).unwrap(), 2.0);
        assert_eq!(h(1.0).unwrap(), 5.0);
        assert_eq!(g_prime(0.0).unwrap(), -2.0);
        assert_relative_eq!(g(0.5).unwrap(), 0.25625);
        assert!(g(1.5).is_err());
        assert!(h_prime(-0.1).is_err());
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let (dg, dh) = (Degradation::default(), Softening::default());
        for i in 1..100 {
            let d = i as f64 / 100.0;
            let e = 1e-6;
            assert_relative_eq!(dg.derivative(d), (dg.value(d + e) - dg.value(d - e)) / (2.0 * e), epsilon = 1e-8);
            assert_relative_eq!(dh.derivative(d), (dh.value(d + e) - dh.value(d - e)) / (2.0 * e), epsilon = 1e-8);
            assert_relative_eq!(
                dg.second_derivative(d),
                (dg.derivative(d + e) - dg.derivative(d - e)) / (2.0 * e),
                epsilon = 1e-7
            );
        }
    }

    #[test]
    fn g_and_h_convex_on_grid() {
        let n = 1001;
        let step = 1.0 / (n - 1) as f64;
        for i in 1..n - 1 {
            let d = i as f64 * step;
            let second = |f: &dyn Fn(f64) -> f64| f(d - step) - 2.0 * f(d) + f(d + step);
            assert!(second(&|x| g(x).unwrap()) >= -1e-9);
            assert!(second(&|x| h(x).unwrap()) >= -1e-9);
        }
    }

    #[test]
    fn wave_speed_scaling() {
        let p = concrete();
        let mut q = p;
        q.density *= 4.0;
        let (a, b) = (p.wave_speeds(), q.wave_speeds());
        assert_relative_eq!(b.dilatational, a.dilatational / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b.shear, a.shear / 2.0, max_relative = 1e-14);
        assert_relative_eq!(b.rayleigh, a.rayleigh / 2.0, max_relative = 1e-14);
        assert!(a.dilatational > a.shear && a.shear > a.rayleigh && a.rayleigh > 0.0);
    }

    #[test]
    fn invalid_params() {
        assert!(MaterialParams::new(1.0, 0.2, 0.0, 1.0, 1.0).is_err());
        assert!(MaterialParams::new(1.0, 0.2, 1.0, -1.0, 1.0).is_err());
        assert!(yc_from_gc(3.0, 0.0).is_err());
    }

    #[test]
    fn pure_tension_split() {
        let p = concrete();
        let s = eigen_split(&Strain2D::new(1e-4, 0.0, 0.0), p.lambda, p.mu);
        assert_eq!(s.eps_plus, Strain2D::new(1e-4, 0.0, 0.0));
        assert_eq!(s.eps_minus, Strain2D::ZERO);
        assert_eq!(s.e_minus, 0.0);
        let sig = stress(&s, 1.0, &p).unwrap();
        assert_eq!(sig, Strain2D::ZERO);
        assert_eq!(free_energy(&s, 1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn diagonal_tension_compression_split() {
        let p = concrete();
        let (a, b) = (2e-4, 3e-4);
        let s = eigen_split(&Strain2D::new(a, -b, 0.0), p.lambda, p.mu);
        assert_relative_eq!(s.eps_plus.xx, a);
        assert_eq!(s.eps_plus.yy, 0.0);
        assert_eq!(s.eps_minus.xx, 0.0);
        assert_relative_eq!(s.eps_minus.yy, -b);
    }

    #[test]
    fn isotropic_strain_uses_fallback() {
        let s = eigen_split(&Strain2D::new(1e-3, 1e-3, 0.0), 1.0, 1.0);
        assert_eq!(s.eps_plus, Strain2D::new(1e-3, 1e-3, 0.0));
        let s = eigen_split(&Strain2D::new(-1e-3, -1e-3, 0.0), 1.0, 1.0);
        assert_eq!(s.eps_minus, Strain2D::new(-1e-3, -1e-3, 0.0));
        assert_eq!(s.e_plus, 0.0);
    }

    #[test]
    fn free_energy_hand_value() {
        let split = StrainSplit {
            e_plus: 100.0,
            e_minus: 7.0,
            ..Default::default()
        };
        let p = concrete();
        assert_relative_eq!(free_energy(&split, 0.5, &p).unwrap(), 32.625, max_relative = 1e-14);
        assert_relative_eq!(free_energy(&split, 0.0, &p).unwrap(), 107.0);
        assert!(free_energy(&split, 1.01, &p).is_err());
        assert_eq!(driving_energy(&split, 0.0, &p).unwrap(), 200.0);
        let zero = StrainSplit::default();
        assert_eq!(driving_energy(&zero, 0.3, &p).unwrap(), 0.0);
    }

    // rotate eps into its principal frame by an independent route (atan2 angle)
    fn principal_oracle(eps: &Strain2D, lambda: f64, mu: f64) -> (Strain2D, f64, f64) {
        let theta = 0.5 * (2.0 * eps.xy).atan2(eps.xx - eps.yy);
        let (c, s) = (theta.cos(), theta.sin());
        let l1 = c * c * eps.xx + 2.0 * c * s * eps.xy + s * s * eps.yy;
        let l2 = s * s * eps.xx - 2.0 * c * s * eps.xy + c * c * eps.yy;
        let (p1, p2) = (l1.max(0.0), l2.max(0.0));
        // back-rotate diag(p1, p2)
        let plus = Strain2D::new(c * c * p1 + s * s * p2, s * s * p1 + c * c * p2, c * s * (p1 - p2));
        let tr = (l1 + l2).max(0.0);
        let (n1, n2) = (l1.min(0.0), l2.min(0.0));
        let trm = (l1 + l2).min(0.0);
        (
            plus,
            0.5 * lambda * tr * tr + mu * (p1 * p1 + p2 * p2),
            0.5 * lambda * trm * trm + mu * (n1 * n1 + n2 * n2),
        )
    }

    proptest! {
        #[test]
        fn split_reconstructs_and_matches_principal_frame(
            xx in -1e-3..1e-3f64, yy in -1e-3..1e-3f64, xy in -1e-3..1e-3f64,
        ) {
            let p = concrete();
            let eps = Strain2D::new(xx, yy, xy);
            let s = eigen_split(&eps, p.lambda, p.mu);
            let rec = s.eps_plus.add(&s.eps_minus);
            prop_assert!((rec.xx - xx).abs() < 1e-12 && (rec.yy - yy).abs() < 1e-12 && (rec.xy - xy).abs() < 1e-12);
            prop_assert!(s.e_plus >= 0.0 && s.e_minus >= 0.0);
            let (plus, ep, em) = principal_oracle(&eps, p.lambda, p.mu);
            prop_assert!((plus.xx - s.eps_plus.xx).abs() < 1e-15);
            prop_assert!((plus.yy - s.eps_plus.yy).abs() < 1e-15);
            prop_assert!((plus.xy - s.eps_plus.xy).abs() < 1e-15);
            prop_assert!((ep - s.e_plus).abs() <= 1e-10 * (1.0 + ep));
            prop_assert!((em - s.e_minus).abs() <= 1e-10 * (1.0 + em));
            // undamaged energy is the full isotropic energy
            let full = 0.5 * p.lambda * eps.trace().powi(2) + p.mu * eps.ddot(&eps);
            let psi = free_energy(&s, 0.0, &p).unwrap();
            prop_assert!((psi - full).abs() <= 1e-10 * full.max(1e-30));
            // d = 0 stress is linear elasticity
            let sig = stress(&s, 0.0, &p).unwrap();
            let lin = eps.scaled(2.0 * p.mu).add(&Strain2D::new(p.lambda * eps.trace(), p.lambda * eps.trace(), 0.0));
            prop_assert!((sig.xx - lin.xx).abs() <= 1e-9 * lin.norm().max(1.0));
            prop_assert!((sig.xy - lin.xy).abs() <= 1e-9 * lin.norm().max(1.0));
        }

        #[test]
        fn damage_objective_convex(ep in 0.0..1e4f64, yc in 1.0..1e3f64) {
            let p = concrete();
            let f = |d: f64| p.degradation.value(d) * ep + yc * p.softening.value(d);
            let n = 200;
            let step = 1.0 / n as f64;
            for i in 1..n {
                let d = i as f64 * step;
                prop_assert!(f(d - step) - 2.0 * f(d) + f(d + step) >= -1e-9);
            }
        }
    }
}
