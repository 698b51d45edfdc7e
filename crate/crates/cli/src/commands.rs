use std::fmt::Write as _;
use std::path::Path;

use serde_json::{json, Map, Value};

use sabasis_core::bundle::{
    nc_pursue, verify_bundle_basis, BundleBasisState, MatStepFn, Tolerances,
};
use sabasis_core::pursuit::all_passed;
use sabasis_core::{
    iteration_bound, minimal_iteration_count, verify_basis_with_jobs, BasisReport, BasisState,
    Check, Error, OrthoFamily, PursuitOptions, Rational, Scalar, StageOptions, StepFn,
};

use crate::fail::{code, CliResult};
use crate::input::{self, Basis};
use crate::{Model, TolArgs};

// Standard output writes that tolerate a closed reader (e.g. `| head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

fn stage_line(m: u64, j: u64, k: u64, units: usize, residual: &str, size: usize) -> String {
    format!(
        "stage {m:>4}  (j={j}, k={k})  +{units} units  residual^2 = {residual}  family = {size}"
    )
}

pub fn build(
    model: Model,
    n: usize,
    stages: u64,
    opts: &StageOptions,
    tols: &TolArgs,
    out: &Path,
) -> CliResult<u8> {
    let text = match model {
        Model::Abelian => {
            let mut state = BasisState::<Rational>::new();
            for m in 1..=stages {
                let size_before = state.family.len();
                match state.advance(m, opts)? {
                    Some(r) => outln!(
                        "{}",
                        stage_line(
                            m,
                            r.j,
                            r.k,
                            r.units_added,
                            &r.residual_norm2_sq.encode(),
                            size_before + r.units_added
                        )
                    ),
                    None => outln!("stage {m:>4}  skipped (k > max-k)"),
                }
            }
            state.to_json()
        }
        Model::Matrix => {
            let tols = tols.tolerances()?;
            let mut state = BundleBasisState::<f64>::new(n)?;
            for m in 1..=stages {
                let size_before = state.family.len();
                match state.advance(m, opts, &tols)? {
                    Some(r) => outln!(
                        "{}",
                        stage_line(
                            m,
                            r.j,
                            r.k,
                            r.units_added,
                            &format!("{:e}", r.residual_norm2_sq),
                            size_before + r.units_added
                        )
                    ),
                    None => outln!("stage {m:>4}  skipped (k > max-k)"),
                }
            }
            state.to_json()
        }
    };
    input::write_text(out, &text)?;
    eprintln!("sabasis: wrote {}", out.display());
    Ok(code::PASS)
}

fn processed_extent(processed: &[(u64, u64)]) -> (u64, u64) {
    processed
        .iter()
        .fold((0, 0), |(j, k), &(pj, pk)| (j.max(pj), k.max(pk)))
}

fn report_json(model: &str, path: &Path, j_max: u64, k_max: u64, report: &BasisReport) -> Value {
    let mut map = Map::new();
    map.insert("model".into(), json!(model));
    map.insert("path".into(), json!(path.display().to_string()));
    map.insert("j_max".into(), json!(j_max));
    map.insert("k_max".into(), json!(k_max));
    if let Value::Object(rest) = serde_json::to_value(report).expect("serializable") {
        map.extend(rest);
    }
    Value::Object(map)
}

/// Always prints a JSON report, including on I/O and parse failures.
pub fn verify(
    path: &Path,
    j_max: Option<u64>,
    k_max: Option<u64>,
    jobs: usize,
    tols: &TolArgs,
) -> u8 {
    let outcome = (|| -> CliResult<Value> {
        let basis = input::load_basis(path)?;
        Ok(match basis {
            Basis::Abelian(state) => {
                let (pj, pk) = processed_extent(&state.processed);
                let (j, k) = (j_max.unwrap_or(pj), k_max.unwrap_or(pk));
                report_json(
                    "abelian",
                    path,
                    j,
                    k,
                    &verify_basis_with_jobs(&state, j, k, jobs),
                )
            }
            Basis::Matrix(state) => {
                let tols = tols.tolerances()?;
                let (pj, pk) = processed_extent(&state.processed);
                let (j, k) = (j_max.unwrap_or(pj), k_max.unwrap_or(pk));
                let report = verify_bundle_basis(&state, j, k, &tols, jobs);
                report_json("matrix", path, j, k, &report)
            }
        })
    })();
    let (value, exit) = match outcome {
        Ok(v) => {
            let passed = v["passed"].as_bool().unwrap_or(false);
            (
                v,
                if passed {
                    code::PASS
                } else {
                    code::VERIFY_FAILED
                },
            )
        }
        Err(e) => (
            json!({
                "path": path.display().to_string(),
                "passed": false,
                "error": {"kind": e.kind(), "message": e.to_string()},
            }),
            e.exit_code(),
        ),
    };
    outln!(
        "{}",
        serde_json::to_string_pretty(&value).expect("serializable")
    );
    exit
}

pub struct PursueArgs<'a> {
    pub target: &'a str,
    pub family: Option<&'a Path>,
    pub epsilon: &'a str,
    pub model: Model,
    pub n: usize,
    pub seed: u64,
    pub out: Option<&'a Path>,
    pub csv: Option<&'a Path>,
    pub opts: PursuitOptions,
    pub tols: &'a TolArgs,
}

/// One row of the decay table: k, α, ‖a_k‖₂², ‖a_k‖∞.
type DecayRow = (usize, Option<f64>, f64, f64);

fn decay_table(rows: &[DecayRow]) -> String {
    let mut s = format!(
        "{:>5}  {:>14}  {:>14}  {:>14}\n",
        "k", "alpha", "|a_k|_2^2", "|a_k|_inf"
    );
    for (k, alpha, e, m) in rows {
        let alpha = alpha.map_or("-".to_string(), |a| format!("{a:.6e}"));
        let _ = writeln!(s, "{k:>5}  {alpha:>14}  {e:>14.6e}  {m:>14.6e}");
    }
    s
}

fn decay_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from("k,alpha,norm2_sq,norm_inf\n");
    for (k, alpha, e, m) in rows {
        let alpha = alpha.map_or(String::new(), |a| format!("{a:?}"));
        let _ = writeln!(s, "{k},{alpha},{e:?},{m:?}");
    }
    s
}

fn checks_value(checks: &[Check]) -> Value {
    serde_json::to_value(checks).expect("serializable")
}

pub fn pursue(args: PursueArgs<'_>) -> CliResult<u8> {
    let (mut trace, rows, checks) = match args.model {
        Model::Abelian => pursue_abelian(&args)?,
        Model::Matrix => pursue_matrix(&args)?,
    };
    let passed = all_passed(&checks);
    trace.insert("checks".into(), checks_value(&checks));
    trace.insert("passed".into(), json!(passed));
    let text = serde_json::to_string_pretty(&Value::Object(trace)).expect("serializable") + "\n";
    let table = decay_table(&rows);
    match args.out {
        Some(path) => {
            input::write_text(path, &text)?;
            out!("{table}");
        }
        None => {
            out!("{text}");
            eprint!("{table}");
        }
    }
    if let Some(path) = args.csv {
        input::write_text(path, &decay_csv(&rows))?;
    }
    if !passed {
        for c in checks.iter().filter(|c| !c.passed) {
            eprintln!(
                "sabasis: check {} failed: {}",
                c.name,
                c.witness.as_deref().unwrap_or("")
            );
        }
    }
    Ok(if passed {
        code::PASS
    } else {
        code::VERIFY_FAILED
    })
}

type PursueOutput = (Map<String, Value>, Vec<DecayRow>, Vec<Check>);

fn pursue_abelian(args: &PursueArgs<'_>) -> CliResult<PursueOutput> {
    let a = input::abelian_target(args.target)?;
    let fam = match args.family {
        Some(p) => OrthoFamily::from_members(input::abelian_family(p)?)?,
        None => OrthoFamily::unit(),
    };
    let eps = input::parse_number(args.epsilon)?;
    let run = sabasis_core::pursue(&a, &fam, &eps, &args.opts)?;
    let checks = run.certify(&a, &fam);
    let t = &run.trace;
    let mut rows = vec![(
        0,
        None,
        t.norm2_sq_initial.to_f64(),
        t.norm_inf_initial.to_f64(),
    )];
    rows.extend(t.iterations.iter().map(|s| {
        (
            s.k,
            Some(s.alpha.to_f64()),
            s.norm2_sq_after.to_f64(),
            s.norm_inf_after.to_f64(),
        )
    }));
    let Value::Object(mut map) = serde_json::to_value(t).expect("serializable") else {
        unreachable!("trace serializes as an object")
    };
    map.insert("model".into(), json!("abelian"));
    let bound = if t.iterations.is_empty() {
        0
    } else {
        iteration_bound(&t.norm2_sq_initial, &t.norm_inf_initial, &t.epsilon)?
    };
    map.insert("iteration_bound".into(), json!(bound));
    map.insert(
        "coefficients".into(),
        json!(run
            .coefficients
            .iter()
            .map(|c| c.encode())
            .collect::<Vec<_>>()),
    );
    map.insert(
        "residual".into(),
        serde_json::to_value(&run.residual).expect("serializable"),
    );
    Ok((map, rows, checks))
}

fn pursue_matrix(args: &PursueArgs<'_>) -> CliResult<PursueOutput> {
    let tols: Tolerances = args.tols.tolerances()?;
    if args.n == 0 || args.n > sabasis_core::bundle::MAX_N {
        return Err(Error::Domain(format!("matrix size n = {} outside [1, 8]", args.n)).into());
    }
    let a = input::matrix_target(args.target, args.n, args.seed)?;
    let fam = match args.family {
        Some(p) => input::matrix_family(p)?,
        None => vec![MatStepFn::identity(a.n())],
    };
    let eps = input::parse_number(args.epsilon)?;
    let run = nc_pursue(&a, &fam, Scalar::to_f64(&eps), &tols, &args.opts)?;
    let checks = run.certify(&a, &tols);
    let mut rows = vec![(0, None, run.norm2_sq_initial, run.norm_inf_initial)];
    rows.extend(
        run.iterations
            .iter()
            .map(|s| (s.k, Some(s.alpha), s.norm2_sq_after, s.norm_inf_after)),
    );
    let Value::Object(mut map) = serde_json::to_value(&run).expect("serializable") else {
        unreachable!("trace serializes as an object")
    };
    map.insert("model".into(), json!("matrix"));
    map.insert("n".into(), json!(a.n()));
    map.insert("coefficients".into(), json!(run.coefficients));
    Ok((map, rows, checks))
}

pub fn bound(norm2_sq: &str, norm_inf: &str, epsilon: &str) -> CliResult<u8> {
    let (e, m, eps) = (
        input::parse_number(norm2_sq)?,
        input::parse_number(norm_inf)?,
        input::parse_number(epsilon)?,
    );
    let minimal = minimal_iteration_count(e.to_f64(), m.to_f64(), eps.to_f64())?;
    let bound = iteration_bound(&e, &m, &eps)?;
    let value = json!({
        "norm2_sq": e.encode(),
        "norm_inf": m.encode(),
        "epsilon": eps.encode(),
        "minimal": minimal,
        "bound": bound,
    });
    outln!(
        "{}",
        serde_json::to_string_pretty(&value).expect("serializable")
    );
    Ok(code::PASS)
}

fn show_stepfn(f: &StepFn<Rational>) -> String {
    let mut s = String::new();
    for (lo, hi, v) in f.cells() {
        let _ = writeln!(s, "[{lo}, {hi})  {}", v.encode());
    }
    s
}

fn show_matfn(f: &MatStepFn<f64>) -> String {
    let mut s = String::new();
    for (w, c) in f.breakpoints().windows(2).zip(f.cells()) {
        let _ = writeln!(s, "[{}, {})", w[0], w[1]);
        for i in 0..f.n() {
            let row: Vec<String> = (0..f.n())
                .map(|j| {
                    let z = c[(i, j)];
                    format!("{:>9.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            let _ = writeln!(s, "  {}", row.join("  "));
        }
    }
    s
}

pub fn show(path: &Path, member: Option<usize>) -> CliResult<u8> {
    let basis = input::load_basis(path)?;
    let (model, size) = match &basis {
        Basis::Abelian(st) => ("abelian".to_string(), st.family.len()),
        Basis::Matrix(st) => (format!("matrix (n = {})", st.n), st.family.len()),
    };
    if let Some(i) = member {
        if i >= size {
            return Err(
                Error::Domain(format!("member {i} out of range (family size {size})")).into(),
            );
        }
        let text = match &basis {
            Basis::Abelian(st) => show_stepfn(&st.family.members()[i]),
            Basis::Matrix(st) => show_matfn(&st.family[i]),
        };
        outln!("member {i} of {size} ({model})");
        out!("{text}");
        return Ok(code::PASS);
    }
    let (stages, processed, cells): (usize, usize, usize) = match &basis {
        Basis::Abelian(st) => (
            st.stage_log.len(),
            st.processed.len(),
            st.family.members().iter().map(|f| f.num_cells()).sum(),
        ),
        Basis::Matrix(st) => (
            st.stage_log.len(),
            st.processed.len(),
            st.family.iter().map(|f| f.num_cells()).sum(),
        ),
    };
    outln!("model      {model}");
    outln!("members    {size}");
    outln!("stages     {stages}");
    outln!("processed  {processed}");
    outln!("cells      {cells}");
    Ok(code::PASS)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fail::CliError;

    #[test]
    fn csv_has_header_and_rows() {
        let rows = vec![(0, None, 1.0, 1.0), (1, Some(1.0), 0.0, 0.0)];
        assert_eq!(
            decay_csv(&rows),
            "k,alpha,norm2_sq,norm_inf\n0,,1.0,1.0\n1,1.0,0.0,0.0\n"
        );
        assert!(decay_table(&rows).lines().count() == 3);
    }

    #[test]
    fn extent_of_processed_pairs() {
        assert_eq!(processed_extent(&[(1, 1), (1, 2), (3, 1)]), (3, 2));
        assert_eq!(processed_extent(&[]), (0, 0));
    }

    #[test]
    fn tolerance_errors_map_to_domain_exit() {
        let e: CliError = Error::Tolerance {
            check: "x".into(),
            deviation: 1.0,
            tolerance: 0.5,
        }
        .into();
        assert_eq!(e.exit_code(), code::DOMAIN);
        assert_eq!(CliError::Parse("p".into()).exit_code(), code::PARSE);
    }
}
