//! Density-dependent isotropic elastic response.
//!
//! The stress is the classical Hooke response divided by the stiffness factor
//! `1 + β tr ε`:
//!
//! ```text
//! T = 𝔼[ε] / (1 + β tr ε),   𝔼[ε] = c̄₁ ε + ν c̄₂ (tr ε) I
//! ```
//!
//! with `c̄₁ = E/(1+ν)` and `c̄₂ = E/((1+ν)(1−2ν))`. The inverse relation is
//! linear in the stress once the factor is known:
//!
//! ```text
//! ε = (1 + β tr ε) (C₁ T + C₂ (tr T) I),   C₁ = (1+ν)/E,   C₂ = −ν/E
//! ```
//!
//! Setting `β = 0` gives back linearized elasticity.

use thiserror::Error;

use crate::tensor::{Mat3, SymTensor3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaterialError {
    #[error("invalid material parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("strain limit violated: 1 + beta*tr(eps) = {factor:e} <= 0")]
    StrainLimit { factor: f64 },
    #[error("stress-to-strain inversion is singular (1 - beta*a*tr(T) = {denominator:e})")]
    SingularInversion { denominator: f64 },
    #[error("non-positive volume factor 1 + tr(eps) = {factor:e}")]
    NonPositiveVolume { factor: f64 },
    #[error("reference density is not set")]
    MissingReferenceDensity,
}

/// Material constants of the density-dependent model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    /// Young's modulus E (Pa).
    pub youngs_modulus: f64,
    /// Poisson ratio ν.
    pub poisson_ratio: f64,
    /// Coupling β between the strain trace and the moduli.
    pub beta: f64,
    /// Reference density ρ₀ (kg/m³); only used for diagnostics.
    pub reference_density: Option<f64>,
}

impl MaterialParams {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64, beta: f64) -> Result<Self, MaterialError> {
        let p = MaterialParams { youngs_modulus, poisson_ratio, beta, reference_density: None };
        p.validate()?;
        Ok(p)
    }

    pub fn with_reference_density(mut self, rho0: f64) -> Result<Self, MaterialError> {
        if !(rho0.is_finite() && rho0 > 0.0) {
            return Err(MaterialError::InvalidParameter { name: "rho0", value: rho0 });
        }
        self.reference_density = Some(rho0);
        Ok(self)
    }

    /// Same material with a different coupling parameter.
    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        let e = self.youngs_modulus;
        let nu = self.poisson_ratio;
        if !(e.is_finite() && e > 0.0) {
            return Err(MaterialError::InvalidParameter { name: "E", value: e });
        }
        if !(nu.is_finite() && nu > 0.0 && nu < 0.5) {
            return Err(MaterialError::InvalidParameter { name: "nu", value: nu });
        }
        if !self.beta.is_finite() {
            return Err(MaterialError::InvalidParameter { name: "beta", value: self.beta });
        }
        Ok(())
    }

    /// c̄₁ = E/(1+ν)
    pub fn c1_bar(&self) -> f64 {
        self.youngs_modulus / (1.0 + self.poisson_ratio)
    }

    /// c̄₂ = E/((1+ν)(1−2ν))
    pub fn c2_bar(&self) -> f64 {
        self.youngs_modulus / ((1.0 + self.poisson_ratio) * (1.0 - 2.0 * self.poisson_ratio))
    }

    /// Compliance coefficient C₁ = (1+ν)/E.
    pub fn compliance_c1(&self) -> f64 {
        (1.0 + self.poisson_ratio) / self.youngs_modulus
    }

    /// Compliance coefficient C₂ = −ν/E.
    pub fn compliance_c2(&self) -> f64 {
        -self.poisson_ratio / self.youngs_modulus
    }

    /// Classical Lamé constants (λ, μ).
    pub fn lame_classical(&self) -> (f64, f64) {
        let nu = self.poisson_ratio;
        (self.c2_bar() * nu, 0.5 * self.c1_bar())
    }

    /// Stiffness factor `1 + β tr ε`, rejected when it is not positive.
    pub fn stiffness_factor(&self, tr_eps: f64) -> Result<f64, MaterialError> {
        let factor = 1.0 + self.beta * tr_eps;
        if factor > 0.0 && factor.is_finite() {
            Ok(factor)
        } else {
            Err(MaterialError::StrainLimit { factor })
        }
    }
}

impl Default for MaterialParams {
    fn default() -> Self {
        MaterialParams { youngs_modulus: 1.0e4, poisson_ratio: 0.3, beta: 0.0, reference_density: None }
    }
}

/// Generalized Lamé coefficients `(λ, μ)` at a given strain trace.
pub fn lame_generalized(params: &MaterialParams, tr_eps: f64) -> Result<(f64, f64), MaterialError> {
    let factor = params.stiffness_factor(tr_eps)?;
    let (lambda, mu) = params.lame_classical();
    Ok((lambda / factor, mu / factor))
}

/// Classical Hooke response 𝔼[ε].
pub fn hooke(params: &MaterialParams, eps: &SymTensor3) -> SymTensor3 {
    let (lambda, mu) = params.lame_classical();
    let mut t = eps.scale(2.0 * mu);
    let p = lambda * eps.trace();
    for c in &mut t.0[..3] {
        *c += p;
    }
    t
}

pub fn stress_from_strain(params: &MaterialParams, eps: &SymTensor3) -> Result<SymTensor3, MaterialError> {
    let factor = params.stiffness_factor(eps.trace())?;
    Ok(hooke(params, eps).scale(1.0 / factor))
}

/// Closed-form inverse of [`stress_from_strain`].
///
/// Tracing the compliance relation gives `tr ε = a tr T / (1 − β a tr T)`
/// with `a = C₁ + 3C₂ = (1−2ν)/E`, hence `1 + β tr ε = 1/(1 − β a tr T)`.
pub fn strain_from_stress(params: &MaterialParams, stress: &SymTensor3) -> Result<SymTensor3, MaterialError> {
    let c1 = params.compliance_c1();
    let c2 = params.compliance_c2();
    let a = (1.0 - 2.0 * params.poisson_ratio) / params.youngs_modulus;
    let tr_t = stress.trace();
    let denominator = 1.0 - params.beta * a * tr_t;
    if denominator == 0.0 || !denominator.is_finite() {
        return Err(MaterialError::SingularInversion { denominator });
    }
    let mut eps = stress.scale(c1);
    for c in &mut eps.0[..3] {
        *c += c2 * tr_t;
    }
    Ok(eps.scale(1.0 / denominator))
}

/// Current density from mass balance, `ρ = ρ₀ / (1 + tr ε)`.
pub fn density_current(params: &MaterialParams, tr_eps: f64) -> Result<f64, MaterialError> {
    let rho0 = params.reference_density.ok_or(MaterialError::MissingReferenceDensity)?;
    let factor = 1.0 + tr_eps;
    if factor <= 0.0 || !factor.is_finite() {
        return Err(MaterialError::NonPositiveVolume { factor });
    }
    Ok(rho0 / factor)
}

/// Strain energy density `W = ε : T`.
pub fn strain_energy_density(eps: &SymTensor3, stress: &SymTensor3) -> f64 {
    eps.ddot(stress)
}

/// Linearized strain `½(∇u + ∇uᵀ)`.
pub fn strain_from_displacement_gradient(grad_u: &Mat3) -> SymTensor3 {
    SymTensor3::sym_part(grad_u)
}
