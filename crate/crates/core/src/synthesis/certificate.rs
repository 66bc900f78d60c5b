//! Serializable record of a feasible `M` and how it was obtained.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{
    build_controller, derive_q_from_r, derive_r_from_q, Controller, CostTriple, GridSpec, Mode, Objective, Result,
    Route, SynthesisError,
};
use crate::convex::{add_quadratic, CostSpec};
use crate::families::{self, FamilyKind, ScalarFamilyParams};
use crate::linalg::{self, Matrix};
use crate::system::LinearSystem;
use crate::tolerances::Tolerances;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateParams {
    /// The cost the designer fixed (`q` or `r`, depending on the mode).
    pub fixed_cost: CostSpec,
    /// Set for the closed-form scalar families; the companion cost is then
    /// the printed closed form instead of a numeric derivation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<ScalarFamilyParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<Objective>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisCertificate {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "M")]
    pub m: Vec<Vec<f64>>,
    pub mode: Mode,
    pub family: String,
    pub params: CertificateParams,
    pub margins: BTreeMap<String, f64>,
    pub grid_spec: GridSpec,
    pub tolerances: Tolerances,
    #[serde(skip)]
    costs: OnceLock<CostTriple>,
}

impl PartialEq for SynthesisCertificate {
    fn eq(&self, o: &Self) -> bool {
        self.a == o.a
            && self.b == o.b
            && self.m == o.m
            && self.mode == o.mode
            && self.family == o.family
            && self.params == o.params
            && self.margins == o.margins
            && self.grid_spec == o.grid_spec
            && self.tolerances == o.tolerances
    }
}

impl SynthesisCertificate {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        system: &LinearSystem,
        m: &Matrix,
        mode: Mode,
        family: String,
        params: CertificateParams,
        margins: BTreeMap<String, f64>,
        grid_spec: GridSpec,
        tolerances: Tolerances,
    ) -> Self {
        Self {
            a: linalg::to_rows(&system.a),
            b: linalg::to_rows(&system.b),
            m: linalg::to_rows(m),
            mode,
            family,
            params,
            margins,
            grid_spec,
            tolerances,
            costs: OnceLock::new(),
        }
    }

    /// Attaches already-built costs so they are not re-derived.
    pub fn with_costs(self, costs: CostTriple) -> Self {
        let _ = self.costs.set(costs);
        self
    }

    pub fn m_matrix(&self) -> Result<Matrix> {
        linalg::from_rows(&self.m).ok_or_else(|| SynthesisError::Dimension("M is ragged".into()))
    }

    /// The deterministic plant `(A, B)`.
    pub fn system(&self) -> Result<LinearSystem> {
        let a = linalg::from_rows(&self.a).ok_or_else(|| SynthesisError::Dimension("A is ragged".into()))?;
        let b = linalg::from_rows(&self.b).ok_or_else(|| SynthesisError::Dimension("B is ragged".into()))?;
        LinearSystem::deterministic(a, b).map_err(|e| SynthesisError::Dimension(e.to_string()))
    }

    /// `(q, r, p)`, rebuilt from the parameters on first use.
    pub fn costs(&self) -> Result<CostTriple> {
        if let Some(c) = self.costs.get() {
            return Ok(c.clone());
        }
        let built = self.build_costs()?;
        let _ = self.costs.set(built.clone());
        Ok(built)
    }

    fn build_costs(&self) -> Result<CostTriple> {
        let system = self.system()?;
        let m = self.m_matrix()?;
        if let Some(params) = self.params.family {
            let kind: FamilyKind = self
                .family
                .parse()
                .map_err(|_| SynthesisError::Unsupported(format!("unknown family {}", self.family)))?;
            let fam = families::family(kind, params).map_err(|e| SynthesisError::Unsupported(e.to_string()))?;
            return Ok(fam.costs());
        }
        match self.mode {
            Mode::StateCostFirst => {
                let q = self.params.fixed_cost.build(system.state_dim())?;
                let r = derive_r_from_q(&system, &q, &m, &self.grid_spec)?;
                let p = add_quadratic(&q, &m)?;
                Ok(CostTriple { q, r, p })
            }
            Mode::ControlCostFirst => {
                let r = self.params.fixed_cost.build(system.input_dim())?;
                let (q, p) = derive_q_from_r(&system, &r, &m, &self.grid_spec)?;
                Ok(CostTriple { q, r, p })
            }
        }
    }

    /// The optimal feedback `∇r*(−2BᵀA⁻ᵀMx)` for this certificate.
    pub fn controller(&self) -> Result<Controller> {
        build_controller(&self.system()?, &self.costs()?.r, &self.m_matrix()?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate is always serializable")
    }

    pub fn from_json(s: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip_is_bit_exact() {
        let sys = LinearSystem::deterministic(
            Matrix::from_row_slice(1, 1, &[1.2]),
            Matrix::from_row_slice(1, 1, &[1.0]),
        )
        .unwrap();
        let mut margins = BTreeMap::new();
        margins.insert("state_curvature".into(), 0.1 + 0.2);
        let cert = SynthesisCertificate::new(
            &sys,
            &Matrix::from_element(1, 1, 1.0 / 3.0),
            Mode::StateCostFirst,
            "elasticnet".into(),
            CertificateParams {
                fixed_cost: CostSpec::ElasticNet { eps: 0.01, l1: 1.0 },
                family: None,
                objective: Some(Objective::MaxMScalar),
                route: None,
            },
            margins,
            GridSpec::default(),
            Tolerances::default(),
        );
        let json = cert.to_json();
        let back = SynthesisCertificate::from_json(&json).unwrap();
        assert_eq!(back, cert);
        assert_eq!(back.m[0][0].to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = r#"{"A":[[1]],"B":[[1]],"M":[[1]],"mode":"state-cost-first","family":"x",
            "params":{"fixed_cost":{"name":"exponential"}},"margins":{},"grid_spec":{},
            "tolerances":{},"extra":1}"#;
        assert!(SynthesisCertificate::from_json(bad).is_err());
    }
}
