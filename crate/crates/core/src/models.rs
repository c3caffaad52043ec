//! Correlation models: interchangeable sources of the detector probabilities
//! and parity correlations that feed the Bell combinations.
//!
//! Every model answers the same questions (no-click and click probabilities,
//! joint parity correlation) for a given pair of displacements. Models are
//! registered by name in a [`ModelRegistry`] and picked at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fock::{displacement_matrix, expectation_product, FockCutoff, ModeOperator, TwoModeState, C64};
use crate::measurement::{click_povm, displaced_parity, noclick_povm, DisplacementSetting};
use crate::oracles;
use crate::states::{incoherent_mixture, singlet_state};

/// Source of the measured statistics for displacements `alpha` (mode a) and
/// `beta` (mode b).
pub trait CorrelationModel: Send + Sync {
    fn name(&self) -> &str;

    /// `<Q_a(alpha) (x) 1>`
    fn noclick_a(&self, alpha: C64) -> Result<f64>;
    /// `<1 (x) Q_b(beta)>`
    fn noclick_b(&self, beta: C64) -> Result<f64>;
    /// `<Q_a(alpha) (x) Q_b(beta)>`
    fn noclick_joint(&self, alpha: C64, beta: C64) -> Result<f64>;

    fn click_a(&self, alpha: C64) -> Result<f64>;
    fn click_b(&self, beta: C64) -> Result<f64>;
    fn click_joint(&self, alpha: C64, beta: C64) -> Result<f64>;

    /// `<Pi_ab(alpha, beta)>`
    fn parity_joint(&self, alpha: C64, beta: C64) -> Result<f64>;
}

impl fmt::Debug for dyn CorrelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CorrelationModel({})", self.name())
    }
}

/// Closed forms for the singlet-like state.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticModel;

impl CorrelationModel for AnalyticModel {
    fn name(&self) -> &str {
        "analytic"
    }
    fn noclick_a(&self, alpha: C64) -> Result<f64> {
        Ok(oracles::q_single(alpha))
    }
    fn noclick_b(&self, beta: C64) -> Result<f64> {
        Ok(oracles::q_single(beta))
    }
    fn noclick_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        Ok(oracles::q_joint(alpha, beta))
    }
    fn click_a(&self, alpha: C64) -> Result<f64> {
        Ok(1.0 - oracles::q_single(alpha))
    }
    fn click_b(&self, beta: C64) -> Result<f64> {
        Ok(1.0 - oracles::q_single(beta))
    }
    fn click_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        Ok(1.0 - oracles::q_single(alpha) - oracles::q_single(beta) + oracles::q_joint(alpha, beta))
    }
    fn parity_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        Ok(oracles::pi_joint(alpha, beta))
    }
}

/// Closed forms for the incoherent mixture of `|1,0>` and `|0,1>`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AnalyticMixtureModel;

impl CorrelationModel for AnalyticMixtureModel {
    fn name(&self) -> &str {
        "analytic-mixture"
    }
    // the mixture has the same single-mode marginals as the singlet
    fn noclick_a(&self, alpha: C64) -> Result<f64> {
        Ok(oracles::q_single(alpha))
    }
    fn noclick_b(&self, beta: C64) -> Result<f64> {
        Ok(oracles::q_single(beta))
    }
    fn noclick_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        Ok(oracles::q_joint_mixture(alpha, beta))
    }
    fn click_a(&self, alpha: C64) -> Result<f64> {
        Ok(1.0 - oracles::q_single(alpha))
    }
    fn click_b(&self, beta: C64) -> Result<f64> {
        Ok(1.0 - oracles::q_single(beta))
    }
    fn click_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        Ok(1.0 - oracles::q_single(alpha) - oracles::q_single(beta)
            + oracles::q_joint_mixture(alpha, beta))
    }
    fn parity_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        Ok(oracles::pi_joint_mixture(alpha, beta))
    }
}

/// Row-norm deficit tolerated on the displaced rows the state occupies.
const CUTOFF_DEFICIT_TOL: f64 = 1e-10;

/// Expectation values of truncated POVM matrices on an explicit state.
#[derive(Clone, Debug)]
pub struct NumericModel {
    name: String,
    state: Arc<TwoModeState>,
    support: usize,
}

impl NumericModel {
    pub fn new(name: impl Into<String>, state: TwoModeState) -> Self {
        let support = state.photon_support(1e-14);
        Self {
            name: name.into(),
            state: Arc::new(state),
            support,
        }
    }

    pub fn singlet(cutoff: FockCutoff) -> Self {
        Self::new("numeric", singlet_state(cutoff))
    }

    pub fn mixture(cutoff: FockCutoff) -> Self {
        Self::new("numeric-mixture", incoherent_mixture(cutoff))
    }

    pub fn state(&self) -> &TwoModeState {
        &self.state
    }

    pub fn cutoff(&self) -> FockCutoff {
        self.state.cutoff()
    }

    /// Fails when the truncated `D(alpha)` has lost norm on rows the state
    /// occupies: `sum_n |<k|D|n>|^2 < 1` for some `k <= support`.
    pub fn check_cutoff(&self, alpha: C64) -> Result<()> {
        let cutoff = self.cutoff();
        let d = displacement_matrix(alpha, cutoff)?;
        let rows = (self.support + 1).min(cutoff.dim());
        let deficit = (0..rows)
            .map(|k| 1.0 - d.matrix().row(k).iter().map(|x| x.norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
        if deficit > CUTOFF_DEFICIT_TOL {
            return Err(Error::CutoffTooSmall {
                n_max: cutoff.n_max(),
                amplitude: alpha.norm(),
                deficit,
            });
        }
        Ok(())
    }

    fn setting(&self, alpha: C64) -> Result<DisplacementSetting> {
        let s = DisplacementSetting::new(alpha)?;
        self.check_cutoff(alpha)?;
        Ok(s)
    }

    fn expect(&self, a: &ModeOperator, b: &ModeOperator) -> Result<f64> {
        Ok(expectation_product(&self.state, a, b)?.re)
    }

    fn identity(&self) -> ModeOperator {
        ModeOperator::identity(self.cutoff())
    }
}

impl CorrelationModel for NumericModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn noclick_a(&self, alpha: C64) -> Result<f64> {
        let q = noclick_povm(self.setting(alpha)?, self.cutoff())?;
        self.expect(&q, &self.identity())
    }
    fn noclick_b(&self, beta: C64) -> Result<f64> {
        let q = noclick_povm(self.setting(beta)?, self.cutoff())?;
        self.expect(&self.identity(), &q)
    }
    fn noclick_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        let qa = noclick_povm(self.setting(alpha)?, self.cutoff())?;
        let qb = noclick_povm(self.setting(beta)?, self.cutoff())?;
        self.expect(&qa, &qb)
    }
    fn click_a(&self, alpha: C64) -> Result<f64> {
        let p = click_povm(self.setting(alpha)?, self.cutoff())?;
        self.expect(&p, &self.identity())
    }
    fn click_b(&self, beta: C64) -> Result<f64> {
        let p = click_povm(self.setting(beta)?, self.cutoff())?;
        self.expect(&self.identity(), &p)
    }
    fn click_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        let pa = click_povm(self.setting(alpha)?, self.cutoff())?;
        let pb = click_povm(self.setting(beta)?, self.cutoff())?;
        self.expect(&pa, &pb)
    }
    fn parity_joint(&self, alpha: C64, beta: C64) -> Result<f64> {
        let pa = displaced_parity(self.setting(alpha)?, self.cutoff())?;
        let pb = displaced_parity(self.setting(beta)?, self.cutoff())?;
        self.expect(&pa, &pb)
    }
}

/// Inputs available to model factories.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub cutoff: FockCutoff,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            cutoff: FockCutoff::new(32).expect("valid"),
        }
    }
}

pub type ModelFactory = fn(&ModelConfig) -> Result<Box<dyn CorrelationModel>>;

struct Entry {
    description: &'static str,
    factory: ModelFactory,
}

/// Name -> factory table for correlation models.
pub struct ModelRegistry {
    entries: BTreeMap<String, Entry>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// Registry holding the analytic and numeric models for the singlet-like
    /// state and for the incoherent mixture.
    pub fn with_builtin() -> Self {
        let mut r = Self::empty();
        r.register("analytic", "closed forms, singlet-like state", |_| {
            Ok(Box::new(AnalyticModel))
        });
        r.register("analytic-mixture", "closed forms, incoherent mixture", |_| {
            Ok(Box::new(AnalyticMixtureModel))
        });
        r.register("numeric", "truncated Fock space, singlet-like state", |cfg| {
            Ok(Box::new(NumericModel::singlet(cfg.cutoff)))
        });
        r.register("numeric-mixture", "truncated Fock space, incoherent mixture", |cfg| {
            Ok(Box::new(NumericModel::mixture(cfg.cutoff)))
        });
        r
    }

    /// Adds or replaces `name`.
    pub fn register(&mut self, name: &str, description: &'static str, factory: ModelFactory) {
        self.entries
            .insert(name.to_string(), Entry { description, factory });
    }

    pub fn build(&self, name: &str, config: &ModelConfig) -> Result<Box<dyn CorrelationModel>> {
        let entry = self.entries.get(name).ok_or_else(|| Error::Unknown {
            kind: "model",
            name: name.to_string(),
        })?;
        (entry.factory)(config)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn describe(&self) -> impl Iterator<Item = (&str, &'static str)> {
        self.entries.iter().map(|(k, e)| (k.as_str(), e.description))
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_builtin()
    }
}
