//! Reading artifacts and parsing target descriptors.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sabasis_core::bundle::{bundle_dense_element, BundleBasisState, CMatrix, Complex, MatStepFn};
use sabasis_core::scalar::{parse_rational, ratio};
use sabasis_core::{dense_element, BasisState, Rational, SAUnitaryFn, StepFn};

use crate::fail::{CliError, CliResult};

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn parse_json(text: &str, what: &str) -> CliResult<Value> {
    serde_json::from_str(text).map_err(|e| CliError::Parse(format!("{what}: {e}")))
}

/// Either kind of basis artifact, dispatched on its `"model"` tag.
pub enum Basis {
    Abelian(BasisState<Rational>),
    Matrix(BundleBasisState<f64>),
}

pub fn load_basis(path: &Path) -> CliResult<Basis> {
    let text = read_text(path)?;
    let value = parse_json(&text, &path.display().to_string())?;
    let model = value.get("model").and_then(Value::as_str).unwrap_or("");
    let bad = |e: serde_json::Error| CliError::Parse(format!("{}: {e}", path.display()));
    match model {
        "abelian" => Ok(Basis::Abelian(serde_json::from_value(value).map_err(bad)?)),
        "matrix" => Ok(Basis::Matrix(serde_json::from_value(value).map_err(bad)?)),
        other => Err(CliError::Parse(format!(
            "{}: unknown model {other:?}",
            path.display()
        ))),
    }
}

/// Parses `"p/q"`, an integer, or a finite decimal literal (exactly).
pub fn parse_number(s: &str) -> CliResult<Rational> {
    if let Some(r) = parse_rational(s) {
        return Ok(r);
    }
    let s = s.trim();
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    let ok = !(int.is_empty() && frac.is_empty())
        && int.chars().all(|c| c.is_ascii_digit())
        && frac.chars().all(|c| c.is_ascii_digit());
    let parsed = ok
        .then(|| parse_rational(&format!("{int}{frac}/1{}", "0".repeat(frac.len()))))
        .flatten()
        .ok_or_else(|| CliError::Parse(format!("not a number: {s:?}")))?;
    Ok(if neg { -parsed } else { parsed })
}

fn parse_index(s: &str, what: &str) -> CliResult<u64> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Parse(format!("bad {what} index {s:?}")))
}

/// Abelian target: `dense:J`, `rademacher:N`, `step:BPS:VALS` (comma
/// separated rationals), or a path to a step-function JSON file.
pub fn abelian_target(desc: &str) -> CliResult<StepFn<Rational>> {
    if let Some(j) = desc.strip_prefix("dense:") {
        return Ok(dense_element(parse_index(j, "dense")?));
    }
    if let Some(n) = desc.strip_prefix("rademacher:") {
        let n = u32::try_from(parse_index(n, "rademacher")?)
            .ok()
            .filter(|n| *n < 64)
            .ok_or_else(|| CliError::Parse(format!("rademacher index {n} too large")))?;
        return Ok(SAUnitaryFn::rademacher(n).into_stepfn());
    }
    if let Some(rest) = desc.strip_prefix("step:") {
        let (bps, vals) = rest
            .split_once(':')
            .ok_or_else(|| CliError::Parse("expected step:BREAKPOINTS:VALUES".into()))?;
        let list = |s: &str| {
            s.split(',')
                .map(parse_number)
                .collect::<CliResult<Vec<_>>>()
        };
        return Ok(StepFn::new(list(bps)?, list(vals)?)?);
    }
    let path = Path::new(desc);
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{desc}: {e}")))
}

/// Abelian family: a JSON list of step functions or a basis file.
pub fn abelian_family(path: &Path) -> CliResult<Vec<StepFn<Rational>>> {
    let text = read_text(path)?;
    let value = parse_json(&text, &path.display().to_string())?;
    let bad = |e: serde_json::Error| CliError::Parse(format!("{}: {e}", path.display()));
    if value.is_array() {
        return serde_json::from_value(value).map_err(bad);
    }
    match load_basis(path)? {
        Basis::Abelian(state) => Ok(state.family.members().to_vec()),
        Basis::Matrix(_) => Err(CliError::Parse(format!(
            "{}: matrix basis given for an abelian run",
            path.display()
        ))),
    }
}

pub fn matrix_family(path: &Path) -> CliResult<Vec<MatStepFn<f64>>> {
    let text = read_text(path)?;
    let value = parse_json(&text, &path.display().to_string())?;
    let bad = |e: serde_json::Error| CliError::Parse(format!("{}: {e}", path.display()));
    if value.is_array() {
        return serde_json::from_value(value).map_err(bad);
    }
    match load_basis(path)? {
        Basis::Matrix(state) => Ok(state.family),
        Basis::Abelian(_) => Err(CliError::Parse(format!(
            "{}: abelian basis given for a matrix run",
            path.display()
        ))),
    }
}

/// Matrix target: `dense:J`, `random` (uses the seed), or a path to a
/// bundle JSON file.
pub fn matrix_target(desc: &str, n: usize, seed: u64) -> CliResult<MatStepFn<f64>> {
    if let Some(j) = desc.strip_prefix("dense:") {
        return Ok(bundle_dense_element(n, parse_index(j, "dense")?));
    }
    if desc == "random" {
        return Ok(random_bundle(n, seed)?);
    }
    let text = read_text(Path::new(desc))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{desc}: {e}")))
}

/// Random Hermitian bundle on a random subgrid of eighths with entries in
/// quarter steps.
pub fn random_bundle(n: usize, seed: u64) -> sabasis_core::Result<MatStepFn<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bps = vec![ratio(0, 1)];
    let mut cuts: Vec<i64> = (1..8).filter(|_| rng.random_bool(0.4)).collect();
    cuts.dedup();
    bps.extend(cuts.iter().map(|&c| ratio(c, 8)));
    bps.push(ratio(1, 1));
    let quarter = |rng: &mut ChaCha8Rng| f64::from(rng.random_range(-4i32..=4)) / 4.0;
    let cells = (1..bps.len())
        .map(|_| {
            let mut m = CMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                m[(i, i)].re = quarter(&mut rng);
                for j in i + 1..n {
                    let z = Complex::new(quarter(&mut rng), quarter(&mut rng));
                    m[(i, j)] = z;
                    m[(j, i)] = z.conj();
                }
            }
            m
        })
        .collect();
    MatStepFn::new(bps, n, cells)
}
