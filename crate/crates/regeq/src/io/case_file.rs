//! Network case files.
//!
//! A case is one TOML document (`schema = "regeq-case-v1"`). Buses are
//! numbered 1..=n_bus in the file and zero-based internally. Lines carry
//! either a per-unit reactance (the PTDF is then derived through the
//! reduced susceptance matrix with the declared slack bus) or a full
//! `ptdf` matrix given row-per-line. Units: MW for limits, demands and
//! capacities; $/MWh and $/MWh² for linear and quadratic costs.
//!
//! ```toml
//! schema = "regeq-case-v1"
//! name = "three-bus"
//!
//! [network]
//! n_bus = 3
//! slack_bus = 1
//!
//! [[line]]            # from, to, limit_mw, reactance (p.u.)
//! from = 1
//! to = 2
//! limit_mw = 110.0
//! reactance = 0.1
//!
//! [[generator]]       # c, c_quad, reg_up c+, reg_dn c-, p_min, p_max
//! bus = 1
//! c = 10.0
//! c_quad = 0.05
//! reg_up = 100.0
//! reg_dn = 0.5
//! p_min = 0.0
//! p_max = 220.0
//!
//! [[load]]            # demand plus shedding costs s, s_quad
//! bus = 2
//! demand = 120.0
//! shed = 500.0
//! shed_quad = 1.0
//!
//! [[wind]]
//! bus = 1
//! capacity = 60.0
//! ```

use std::path::Path;

use nalgebra::DMatrix;
use serde::Deserialize;
use thiserror::Error;

use crate::market::{CaseError, NetworkCase};

pub const CASE_SCHEMA: &str = "regeq-case-v1";

#[derive(Debug, Error)]
pub enum CaseFileError {
    #[error("cannot read case file: {0}")]
    Read(#[from] std::io::Error),
    #[error("case schema error: {0}")]
    Schema(String),
    #[error("case invariant violated: {0}")]
    Invariant(#[from] CaseError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseDoc {
    schema: String,
    name: String,
    network: NetworkDoc,
    #[serde(default)]
    line: Vec<LineDoc>,
    #[serde(default)]
    generator: Vec<GenDoc>,
    #[serde(default)]
    load: Vec<LoadDoc>,
    #[serde(default)]
    wind: Vec<WindDoc>,
    /// Optional precomputed PTDF, one row per line (overrides reactances).
    ptdf: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    n_bus: usize,
    #[serde(default = "default_slack")]
    slack_bus: usize,
}

fn default_slack() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineDoc {
    from: usize,
    to: usize,
    limit_mw: f64,
    reactance: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDoc {
    bus: usize,
    c: f64,
    c_quad: f64,
    reg_up: f64,
    reg_dn: f64,
    p_min: f64,
    p_max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LoadDoc {
    bus: usize,
    demand: f64,
    shed: f64,
    shed_quad: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindDoc {
    bus: usize,
    capacity: f64,
}

pub fn load_case(path: impl AsRef<Path>) -> Result<NetworkCase, CaseFileError> {
    let text = std::fs::read_to_string(path)?;
    load_case_str(&text)
}

pub fn load_case_str(text: &str) -> Result<NetworkCase, CaseFileError> {
    let doc: CaseDoc = toml::from_str(text).map_err(|e| CaseFileError::Schema(e.to_string()))?;
    if doc.schema != CASE_SCHEMA {
        return Err(CaseFileError::Schema(format!(
            "expected schema {CASE_SCHEMA}, found {}",
            doc.schema
        )));
    }
    let nb = doc.network.n_bus;
    if nb == 0 {
        return Err(CaseFileError::Schema("n_bus must be >= 1".into()));
    }
    let bus_index = |b: usize, what: &str| -> Result<usize, CaseFileError> {
        if b == 0 || b > nb {
            Err(CaseFileError::Schema(format!(
                "{what} references bus {b}, valid range is 1..={nb}"
            )))
        } else {
            Ok(b - 1)
        }
    };

    let mut case = NetworkCase {
        name: doc.name,
        n_bus: nb,
        ptdf: vec![],
        line_limit: Vec::with_capacity(doc.line.len()),
        demand: vec![0.0; nb],
        gen_cost_lin: vec![0.0; nb],
        gen_cost_quad: vec![0.0; nb],
        reg_up_cost: vec![0.0; nb],
        reg_dn_cost: vec![0.0; nb],
        shed_cost_lin: vec![0.0; nb],
        shed_cost_quad: vec![0.0; nb],
        p_min: vec![0.0; nb],
        p_max: vec![0.0; nb],
        wind_bus: Vec::with_capacity(doc.wind.len()),
        wind_cap: Vec::with_capacity(doc.wind.len()),
    };

    let mut seen_gen = vec![false; nb];
    for g in &doc.generator {
        let b = bus_index(g.bus, "generator")?;
        if seen_gen[b] {
            return Err(CaseFileError::Schema(format!(
                "more than one generator on bus {}",
                g.bus
            )));
        }
        seen_gen[b] = true;
        case.gen_cost_lin[b] = g.c;
        case.gen_cost_quad[b] = g.c_quad;
        case.reg_up_cost[b] = g.reg_up;
        case.reg_dn_cost[b] = g.reg_dn;
        case.p_min[b] = g.p_min;
        case.p_max[b] = g.p_max;
    }
    let mut seen_load = vec![false; nb];
    for l in &doc.load {
        let b = bus_index(l.bus, "load")?;
        if seen_load[b] {
            return Err(CaseFileError::Schema(format!(
                "more than one load on bus {}",
                l.bus
            )));
        }
        seen_load[b] = true;
        case.demand[b] = l.demand;
        case.shed_cost_lin[b] = l.shed;
        case.shed_cost_quad[b] = l.shed_quad;
    }
    for w in &doc.wind {
        let b = bus_index(w.bus, "wind farm")?;
        case.wind_bus.push(b);
        case.wind_cap.push(w.capacity);
    }
    for line in &doc.line {
        bus_index(line.from, "line")?;
        bus_index(line.to, "line")?;
        case.line_limit.push(line.limit_mw);
    }

    case.ptdf = match doc.ptdf {
        Some(rows) => {
            if rows.len() != doc.line.len() || rows.iter().any(|r| r.len() != nb) {
                return Err(CaseFileError::Schema(
                    "ptdf must be lines × n_bus".into(),
                ));
            }
            rows
        }
        None if doc.line.is_empty() => vec![],
        None => {
            let slack = bus_index(doc.network.slack_bus, "slack")?;
            ptdf_from_reactances(nb, slack, &doc.line, &bus_index)?
        }
    };

    case.validate()?;
    Ok(case)
}

/// DC power transfer distribution factors from line reactances: the
/// susceptance-weighted incidence against the reduced bus matrix, zero
/// column at the slack.
fn ptdf_from_reactances(
    nb: usize,
    slack: usize,
    lines: &[LineDoc],
    bus_index: &dyn Fn(usize, &str) -> Result<usize, CaseFileError>,
) -> Result<Vec<Vec<f64>>, CaseFileError> {
    let nl = lines.len();
    let mut bf = DMatrix::<f64>::zeros(nl, nb);
    let mut bbus = DMatrix::<f64>::zeros(nb, nb);
    for (l, line) in lines.iter().enumerate() {
        let x = line.reactance.ok_or_else(|| {
            CaseFileError::Schema(format!(
                "line {}-{} has no reactance and no ptdf block was given",
                line.from, line.to
            ))
        })?;
        if x <= 0.0 {
            return Err(CaseFileError::Schema(format!(
                "line {}-{} reactance must be > 0",
                line.from, line.to
            )));
        }
        let (i, j) = (bus_index(line.from, "line")?, bus_index(line.to, "line")?);
        if i == j {
            return Err(CaseFileError::Schema(format!(
                "line {}-{} connects a bus to itself",
                line.from, line.to
            )));
        }
        let b = 1.0 / x;
        bf[(l, i)] += b;
        bf[(l, j)] -= b;
        bbus[(i, i)] += b;
        bbus[(j, j)] += b;
        bbus[(i, j)] -= b;
        bbus[(j, i)] -= b;
    }

    // reduce out the slack bus, invert, pad back with a zero column
    let keep: Vec<usize> = (0..nb).filter(|&b| b != slack).collect();
    let reduced = DMatrix::from_fn(nb - 1, nb - 1, |r, c| bbus[(keep[r], keep[c])]);
    let inv = reduced.clone().try_inverse().ok_or_else(|| {
        CaseFileError::Schema("grid is disconnected: reduced susceptance matrix is singular".into())
    })?;
    let mut full_inv = DMatrix::<f64>::zeros(nb, nb);
    for (r, &br) in keep.iter().enumerate() {
        for (c, &bc) in keep.iter().enumerate() {
            full_inv[(br, bc)] = inv[(r, c)];
        }
    }
    let ptdf = bf * full_inv;
    Ok((0..nl)
        .map(|l| (0..nb).map(|b| ptdf[(l, b)]).collect())
        .collect())
}


#[cfg(test)]
mod bundled_cases {
    use super::*;

    fn cases_dir() -> std::path::PathBuf {
        std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../cases")
    }

    #[test]
    fn tutorial_case_loads() {
        let case = load_case(cases_dir().join("tutorial_1bus.toml")).unwrap();
        assert_eq!(case.n_bus, 1);
        assert_eq!(case.demand[0], 50.0);
    }

    #[test]
    fn three_bus_case_matches_fixture() {
        let case = load_case(cases_dir().join("three_bus.toml")).unwrap();
        let fixture = crate::fixtures::three_bus_case();
        assert_eq!(case.n_bus, fixture.n_bus);
        assert_eq!(case.demand, fixture.demand);
        assert_eq!(case.wind_bus, fixture.wind_bus);
        for l in 0..3 {
            for b in 0..3 {
                approx::assert_abs_diff_eq!(case.ptdf[l][b], fixture.ptdf[l][b], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn rts24_loads_and_reports_wind_share() {
        let case = load_case(cases_dir().join("rts24_api.toml")).unwrap();
        assert_eq!(case.n_bus, 24);
        assert_eq!(case.n_line(), 38);
        assert_eq!(case.wind_bus.len(), 6);
        let share: f64 = case.wind_cap.iter().sum::<f64>() / case.demand.iter().sum::<f64>();
        assert!((share - 0.384).abs() < 5e-4, "wind share {share}");
        // PTDF sanity: injection at the slack produces zero flow everywhere
        for l in 0..case.n_line() {
            assert!(case.ptdf[l][12].abs() < 1e-12);
        }
    }
}
