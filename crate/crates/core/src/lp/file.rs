use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LpInstance, Matrix, PublicRegion, Sense, SensitivityModel};
use crate::error::{Error, Result};

/// On-disk JSON form of an instance. This is the single ingestion point for
/// every solver and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub m: usize,
    pub d: usize,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub sensitivity: SensitivityModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<PublicRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub var_lower: Option<Vec<f64>>,
}

/// A validated instance together with the one sensitivity model it carries.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivateLp {
    pub instance: LpInstance,
    pub sensitivity: SensitivityModel,
}

impl PrivateLp {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.try_into()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_file(&self) -> InstanceFile {
        let inst = &self.instance;
        InstanceFile {
            m: inst.m(),
            d: inst.d(),
            a: inst.a().to_rows(),
            b: inst.b().to_vec(),
            c: inst.c().map(<[f64]>::to_vec),
            senses: inst.senses().to_vec(),
            sensitivity: self.sensitivity,
            region: match inst.region() {
                PublicRegion::NonnegativeOrthant => None,
                r => Some(r.clone()),
            },
            var_lower: inst
                .var_lower()
                .iter()
                .any(|&l| l != 0.0)
                .then(|| inst.var_lower().to_vec()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("instance serializes")
    }
}

impl TryFrom<InstanceFile> for PrivateLp {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.a.len() != f.m {
            return Err(Error::Dimension(format!("m = {} but A has {} rows", f.m, f.a.len())));
        }
        if f.a.iter().any(|r| r.len() != f.d) {
            return Err(Error::Dimension(format!("d = {} but some row of A differs", f.d)));
        }
        f.sensitivity.validate()?;
        let mut instance = LpInstance::new(Matrix::from_rows(f.a)?, f.b, f.c, f.senses)?;
        if let Some(region) = f.region {
            instance = instance.with_region(region)?;
        }
        if let Some(lower) = f.var_lower {
            instance = instance.with_var_lower(lower)?;
        }
        Ok(PrivateLp {
            instance,
            sensitivity: f.sensitivity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "m": 2, "d": 2,
        "A": [[1.0, 0.0], [0.0, 1.0]],
        "b": [0.6, 0.6],
        "senses": ["LE", "GE"],
        "sensitivity": {"kind": "low_sens_scalar", "delta_inf": 0.002},
        "region": {"kind": "simplex"}
    }"#;

    #[test]
    fn parses_sample() {
        let lp = PrivateLp::from_json(SAMPLE).unwrap();
        assert_eq!(lp.sensitivity, SensitivityModel::LowSensScalar { delta_inf: 0.002 });
        assert_eq!(lp.instance.senses(), &[Sense::Le, Sense::Ge]);
        assert_eq!(lp.instance.region(), &PublicRegion::Simplex);
        let again = PrivateLp::from_json(&lp.to_json()).unwrap();
        assert_eq!(again, lp);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bad = SAMPLE.replace("\"m\": 2", "\"m\": 3");
        assert!(matches!(PrivateLp::from_json(&bad), Err(Error::Dimension(_))));
    }

    #[test]
    fn negative_sensitivity_rejected() {
        let bad = SAMPLE.replace("0.002", "-1.0");
        assert!(matches!(PrivateLp::from_json(&bad), Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn objective_slice_region() {
        let text = r#"{"m":1,"d":2,"A":[[1,1]],"b":[1],"c":[1,2],"senses":["GE"],
            "sensitivity":{"kind":"high_sens_constraint"},
            "region":{"kind":"objective_slice","c":[1,2],"opt":3}}"#;
        let lp = PrivateLp::from_json(text).unwrap();
        assert_eq!(
            lp.instance.region(),
            &PublicRegion::ObjectiveSlice { c: vec![1.0, 2.0], opt: 3.0 }
        );
    }
}
