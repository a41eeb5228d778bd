//! Hyper-parameter sweeps over the retrospective protocol.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::retro::{retrospective_eval, MethodSummary, RetroEvalConfig};
use crate::data::SplitDataset;
use crate::engine::Method;
use crate::model::ScorerParams;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParam {
    Gamma1,
    Lambda,
    Gamma2,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Gamma1 => "gamma1",
            SweepParam::Lambda => "lambda",
            SweepParam::Gamma2 => "gamma2",
        }
    }

    /// The solver the parameter belongs to.
    pub fn method(self) -> Method {
        match self {
            SweepParam::Gamma1 => Method::Search,
            SweepParam::Lambda | SweepParam::Gamma2 => Method::Relax,
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gamma1" | "γ1" => Ok(SweepParam::Gamma1),
            "lambda" | "λ" => Ok(SweepParam::Lambda),
            "gamma2" | "γ2" => Ok(SweepParam::Gamma2),
            other => Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: Vec<MethodSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub param: SweepParam,
    pub method: Method,
    pub points: Vec<SweepPoint>,
}

/// One retrospective evaluation per value, restricted to the method the
/// parameter belongs to.
pub fn ablation_sweep(
    params: &ScorerParams,
    data: &SplitDataset,
    param: SweepParam,
    values: &[f64],
    base: &RetroEvalConfig,
) -> Result<SweepReport> {
    let method = param.method();
    let mut points = Vec::with_capacity(values.len());
    for &value in values {
        let mut config = base.clone();
        config.methods = vec![method];
        match param {
            SweepParam::Gamma1 => config.hyper.gamma1 = value,
            SweepParam::Lambda => config.hyper.lambda = value,
            SweepParam::Gamma2 => config.hyper.gamma2 = value,
        }
        let report = retrospective_eval(params, data, &config)?;
        points.push(SweepPoint {
            value,
            summary: report.summary,
        });
    }
    Ok(SweepReport { param, method, points })
}

impl SweepReport {
    /// Header: `param,value,method,k,attempts,successes,fidelity,complexity,accuracy`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("param,value,method,k,attempts,successes,fidelity,complexity,accuracy\n");
        for p in &self.points {
            for c in &p.summary {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{:.6},{:.6},{:.6}",
                    self.param.as_str(),
                    p.value,
                    c.method,
                    c.k,
                    c.attempts,
                    c.successes,
                    c.fidelity,
                    c.complexity,
                    c.accuracy
                );
            }
        }
        s
    }
}
