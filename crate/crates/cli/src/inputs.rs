use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use padic_polygon::scalars::parse_q;
use padic_polygon::{AffinoidDomain, ConnectionMatrix, DifferentialOperator, Point, Prime, QLog, RadiiProfile};
use serde::de::DeserializeOwned;

/// A differential system given either as an operator or as a matrix.
#[derive(Debug, Clone)]
pub enum System {
    Operator(DifferentialOperator),
    Matrix(ConnectionMatrix),
}

impl System {
    pub fn matrix(&self) -> ConnectionMatrix {
        match self {
            System::Operator(op) => op.companion(),
            System::Matrix(m) => m.clone(),
        }
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

/// Deserializes with the failing field path and line/column in the error.
pub fn parse_json<T: DeserializeOwned>(bytes: &[u8], what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        anyhow!("invalid {what} at field `{path}` (line {}, column {}): {inner}", inner.line(), inner.column())
    })
}

/// Operator JSON carries `coeffs`, matrix JSON carries `entries`.
pub fn parse_system(bytes: &[u8]) -> Result<System> {
    let v: serde_json::Value = serde_json::from_slice(bytes).context("operator or matrix file is not JSON")?;
    if v.get("coeffs").is_some() {
        Ok(System::Operator(parse_json(bytes, "operator")?))
    } else if v.get("entries").is_some() {
        Ok(System::Matrix(parse_json(bytes, "matrix")?))
    } else {
        bail!("expected an operator (`coeffs`) or a matrix (`entries`)")
    }
}

pub fn parse_domain(bytes: &[u8], p: Prime) -> Result<AffinoidDomain> {
    let dom: AffinoidDomain = parse_json(bytes, "domain")?;
    dom.validate(p)?;
    Ok(dom)
}

/// Reads a profile written by the `profile` command, or a bare profile.
pub fn parse_profile(bytes: &[u8]) -> Result<RadiiProfile> {
    let v: serde_json::Value = serde_json::from_slice(bytes).context("profile file is not JSON")?;
    if let Some(data) = v.get("data") {
        let text = serde_json::to_vec(data)?;
        parse_json(&text, "profile")
    } else {
        parse_json(bytes, "profile")
    }
}

pub fn parse_prime(p: Option<u64>) -> Result<Prime> {
    let p = p.ok_or_else(|| anyhow!("missing prime: pass -p"))?;
    Ok(Prime::new(p)?)
}

/// `c,L` with rationals `a/b`; `L` may be `-inf` for a type-1 point.
pub fn parse_point(s: &str) -> Result<Point> {
    let (c, l) = s.split_once(',').ok_or_else(|| anyhow!("expected `c,L`, got `{s}`"))?;
    let center = parse_q(c.trim())?;
    let log_radius: QLog = l.trim().parse()?;
    if log_radius == QLog::PosInf {
        bail!("the log radius must be finite or -inf");
    }
    Ok(Point { center, log_radius })
}
