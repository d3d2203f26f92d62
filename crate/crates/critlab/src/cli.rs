//! Command-line harness: every library capability as a subcommand.
//!
//! Design contract:
//!
//! * **Validate first.** Every parameter is checked — type, range,
//!   unknown keys, cross-field constraints — before any work starts.
//!   [`parse_config`] collects *every* violation in a document with a
//!   JSON-path-like locator, so a config file can be fixed in one pass.
//!   Command-line flags go through the same validator.
//! * **Deterministic.** Given the same config and seed, a run produces
//!   byte-identical output modulo the `runtime_ms` field. All
//!   randomness flows from `--seed`; the wall clock is consulted only
//!   to measure elapsed time.
//! * **Structured results.** Every run emits a [`ResultEnvelope`]:
//!   experiment id, canonical parameter echo, seed, a nonempty list of
//!   named estimates with error bars and sample counts, elapsed
//!   milliseconds, and the crate version. JSON (default) and CSV
//!   emitters round-trip: `from_json(to_json(x)) == x` and
//!   `from_csv(to_csv(x)) == x`.
//! * **Stable exit codes.** `0` success; `2` validation or usage
//!   error; `3` a documented capacity was exceeded; `4` an iterative
//!   solver failed to converge. The `accept` subcommand exits `0`
//!   regardless of criterion outcomes — failures are report entries,
//!   not process errors.
//!
//! Parallelism is capped by the `CRITLAB_THREADS` environment
//! variable (default: all cores).
//!
//! CSV layout: five `# key: value` metadata lines (experiment,
//! version, seed, runtime_ms, params as inline JSON), then exactly one
//! header line whose columns depend on the experiment family, then one
//! row per estimate. Numbers are printed in shortest round-trip form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use clap::ArgMatches;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::acceptance::{self, fk_connect_prob, Status, Tier};
use crate::currents::current_correlation;
use crate::error::{ConfigViolation, Error, Result};
use crate::fk::{fk_exact, fk_theta, ising_p_from_beta, FKParams};
use crate::gibbs::{enumerate, BoundaryCondition, EnergyModel};
use crate::graph::Graph;
use crate::homotopy::{critical_fk_loop_families, ensemble_distance};
use crate::ising::{
    magnetization, sample_chain, susceptibility_from_samples, two_point_exact, Dynamics,
    IsingParams, McOptions, SpinState,
};
use crate::isoradial::{check_isoradial, isoradial_embed, swap_rows, IsoradialSequence};
use crate::lattice::{Lattice, Site};
use crate::osss::{osss_verify, random_instance};
use crate::percolation::{crossing_probability, theta, Mode};
use crate::phi4::{block_spin_law, gaussianity_report, phi4_observable, BlockSpinSpec, Phi4Params, Phi4RunOptions};
use crate::rng::{root_rng, stream_rng};
use crate::sixv::{c_of_q, leading_eigen, transfer_block};
use crate::util::{batch_stats, ols_fit};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

/// Parameter type with its admissible range.
#[derive(Clone, Copy, Debug)]
enum Kind {
    UInt { min: u64, max: u64 },
    Int { min: i64, max: i64 },
    Float { min: f64, max: f64 },
    Choice(&'static [&'static str]),
    /// Comma-separated on the command line; array or scalar in JSON.
    FloatList { min: f64, max: f64 },
}

/// One named parameter of a subcommand.
#[derive(Clone, Copy)]
struct FieldSpec {
    name: &'static str,
    kind: Kind,
    /// Textual default, run through the same validator. `None` only
    /// for genuinely optional fields (`q`/`c` of `sixv-spectrum`).
    default: Option<&'static str>,
    help: &'static str,
}

const fn uint(name: &'static str, min: u64, max: u64, default: &'static str, help: &'static str) -> FieldSpec {
    FieldSpec { name, kind: Kind::UInt { min, max }, default: Some(default), help }
}

const fn int(name: &'static str, min: i64, max: i64, default: &'static str, help: &'static str) -> FieldSpec {
    FieldSpec { name, kind: Kind::Int { min, max }, default: Some(default), help }
}

const fn float(name: &'static str, min: f64, max: f64, default: &'static str, help: &'static str) -> FieldSpec {
    FieldSpec { name, kind: Kind::Float { min, max }, default: Some(default), help }
}

const fn opt_float(name: &'static str, min: f64, max: f64, help: &'static str) -> FieldSpec {
    FieldSpec { name, kind: Kind::Float { min, max }, default: None, help }
}

const fn choice(name: &'static str, options: &'static [&'static str], default: &'static str, help: &'static str) -> FieldSpec {
    FieldSpec { name, kind: Kind::Choice(options), default: Some(default), help }
}

const fn float_list(name: &'static str, min: f64, max: f64, default: &'static str, help: &'static str) -> FieldSpec {
    FieldSpec { name, kind: Kind::FloatList { min, max }, default: Some(default), help }
}

/// CSV column family of a subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Family {
    /// `p,n,estimate,stderr,replicas,seed`
    Percolation,
    /// `q,p,n,estimate,stderr,replicas,seed`
    Fk,
    /// `beta,observable,estimate,stderr,n,seed`
    Ising,
    /// `N,n,c,lambda,iters,residual`
    Sixv,
    /// `name,value,stderr,n,seed`
    Generic,
}

struct SubSpec {
    name: &'static str,
    about: &'static str,
    fields: &'static [FieldSpec],
    family: Family,
}

/// Fields accepted by every subcommand (validated like any other,
/// echoed outside `params`).
static COMMON: &[FieldSpec] = &[
    uint("seed", 0, u64::MAX, "0", "root RNG seed; all experiment randomness derives from it"),
    choice("out", &["json", "csv"], "json", "output format"),
];

static SCHEMA: &[SubSpec] = &[
    SubSpec {
        name: "perco-cross",
        about: "Left-right crossing probability of the N-box under Bernoulli edge percolation",
        fields: &[
            int("n", 1, 101, "11", "box radius N of the even-sublattice box"),
            float_list("p", 0.0, 1.0, "0.5", "edge density; a comma-separated list sweeps several densities"),
            uint("replicas", 0, 1_000_000_000, "100000", "Monte Carlo replicas per density; 0 switches to exact enumeration"),
        ],
        family: Family::Percolation,
    },
    SubSpec {
        name: "perco-theta",
        about: "Origin-to-boundary connection probability theta_n",
        fields: &[
            int("n", 1, 101, "6", "box radius n"),
            float_list("p", 0.0, 1.0, "0.5", "edge density; a comma-separated list sweeps several densities"),
            uint("replicas", 0, 1_000_000_000, "100000", "Monte Carlo replicas per density; 0 switches to exact enumeration (n <= 6)"),
        ],
        family: Family::Percolation,
    },
    SubSpec {
        name: "ising-sample",
        about: "Sample the Ising model on an l x l torus; reports |m| and the susceptibility",
        fields: &[
            int("l", 3, 256, "16", "torus side length"),
            float("beta", 1e-9, 10.0, "0.44068679350977147", "inverse temperature (default: the self-dual critical point)"),
            choice("dynamics", &["wolff", "glauber"], "wolff", "Markov chain dynamics"),
            uint("burn_in", 0, 10_000_000, "500", "discarded equilibration sweeps"),
            uint("samples", 64, 10_000_000, "4000", "recorded samples"),
            uint("stride", 1, 1000, "1", "sweeps between recorded samples"),
        ],
        family: Family::Ising,
    },
    SubSpec {
        name: "ising-corr",
        about: "Exact two-point function on a free-boundary chain, with a log-decay fit",
        fields: &[
            int("len", 2, 20, "7", "chain length (exact enumeration of 2^len states)"),
            float("beta", 1e-9, 10.0, "0.5", "inverse temperature"),
            uint("xmax", 1, 19, "6", "largest separation reported (must be < len)"),
        ],
        family: Family::Ising,
    },
    SubSpec {
        name: "current-check",
        about: "Random-current two-point values and truncation bounds on a named small graph",
        fields: &[
            choice(
                "graph",
                &["edge", "path3", "cycle3", "cycle4", "star3", "complete4", "k4-minus", "bowtie", "triangle-pendant"],
                "cycle4",
                "which graph to analyze",
            ),
            float("beta", 0.0, 1.0, "0.5", "inverse temperature (the truncation bound needs beta <= 1)"),
            uint("nmax", 1, 40, "20", "per-edge truncation order of the current expansion"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "fk-sample",
        about: "FK random-cluster connection probability theta on the radius-n ball",
        fields: &[
            int("n", 1, 32, "8", "ball radius"),
            float("q", 1.0, 64.0, "2.0", "cluster weight q >= 1"),
            float_list("p", 0.0, 1.0, "0.5", "edge density; a comma-separated list sweeps several densities"),
            uint("replicas", 0, 1_000_000_000, "20000", "Monte Carlo replicas per density; 0 switches to exact enumeration (small balls only)"),
        ],
        family: Family::Fk,
    },
    SubSpec {
        name: "fk-es-check",
        about: "Edwards-Sokal identity on a w x h grid: exact FK connectivity vs Ising correlation",
        fields: &[
            int("w", 2, 4, "3", "grid width"),
            int("h", 1, 3, "2", "grid height"),
            float("beta", 1e-9, 10.0, "0.44", "Ising inverse temperature; the FK side uses p = 1 - exp(-2 beta)"),
            float("tol", 0.0, 1.0, "1e-10", "largest acceptable deviation"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "sixv-spectrum",
        about: "Leading six-vertex transfer-matrix eigenvalues in conserved up-arrow sectors",
        fields: &[
            uint("n", 2, 14, "12", "row width (even)"),
            opt_float("q", 0.0, 16.0, "Potts q defining the weight c = sqrt(2 + sqrt q); exclusive with --c"),
            opt_float("c", 0.1, 8.0, "six-vertex weight c, given directly; exclusive with --q (default: q = 9)"),
            uint("rmax", 0, 7, "3", "deepest sector offset; reports n_up = n/2 - r for r = 0..=rmax"),
            float("tol", 1e-15, 1e-3, "1e-12", "power-iteration residual target"),
            uint("max_iters", 1, 1_000_000, "20000", "power-iteration cap; exhausting it is a convergence failure (exit 4)"),
        ],
        family: Family::Sixv,
    },
    SubSpec {
        name: "osss-verify",
        about: "Randomized verification of the OSSS variance inequality",
        fields: &[
            uint("edges", 1, 10, "4", "number of coordinates of the random instances"),
            uint("instances", 1, 1_000_000, "1000", "number of random (measure, functional, tree) instances"),
            float("tol", 0.0, 1.0, "1e-12", "slack below -tol counts as a violation"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "phi4-cumulants",
        about: "Gaussianity diagnostics for the normalized field sum of lattice phi^4 on an l x l torus",
        fields: &[
            float("g", 0.0, 1000.0, "1.0", "quartic coupling"),
            float("nu", -100.0, 100.0, "-0.5", "mass-term coefficient (negative = double well)"),
            int("l", 3, 64, "8", "torus side length"),
            uint("sweeps", 1000, 10_000_000, "20000", "recorded Metropolis sweeps (>= 1000 for stable cumulants)"),
            uint("burn_in", 0, 1_000_000, "2000", "discarded equilibration sweeps"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "blockspin-law",
        about: "Exact magnetization law of a K-spin block under a pair-coupled kernel",
        fields: &[
            uint("k", 1, 20, "8", "block size K (exact enumeration of 2^K states)"),
            float("a", -2.0, 2.0, "0.1", "off-diagonal pair coupling"),
            float("delta", 1e-9, 100.0, "1.0", "single-site weight spread"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "homotopy-dist",
        about: "Ensemble distance between two independent critical FK loop ensembles",
        fields: &[
            uint("samples", 2, 256, "8", "loop families per ensemble (matching is exact up to 256)"),
            int("n", 4, 128, "8", "box radius of the underlying critical FK model"),
            uint("sweeps", 1, 100_000, "30", "Swendsen-Wang sweeps per sample"),
            float_list("eta_grid", 0.001, 1.0, "0.5,0.25,0.125", "puncture meshes, descending"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "embed-check",
        about: "Isoradiality, diamond edge lengths, and the row-swap involution on random embeddings",
        fields: &[
            int("size", 2, 40, "6", "half-width of the embedded window"),
            float("amplitude", 0.0, 0.7, "0.3", "maximum |angle| of the random transverse sequences"),
            uint("windows", 1, 100_000, "100", "number of random angle sequences tested"),
            float("tol", 0.0, 1.0, "1e-9", "largest acceptable circumradius deviation"),
        ],
        family: Family::Generic,
    },
    SubSpec {
        name: "accept",
        about: "Run the acceptance suite; every criterion becomes a report row (exit 0 regardless)",
        fields: &[choice("tier", &["fast", "full"], "fast", "fast: exact/enumerative checks; full: adds large-lattice Monte Carlo")],
        family: Family::Generic,
    },
];

fn sub_spec(name: &str) -> Option<&'static SubSpec> {
    SCHEMA.iter().find(|s| s.name == name)
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// A raw field value from either input channel.
#[derive(Clone, Copy)]
enum Raw<'a> {
    Json(&'a Value),
    Text(&'a str),
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn uint_range(min: u64, max: u64) -> String {
    if max == u64::MAX {
        format!("an integer >= {min}")
    } else {
        format!("an integer in [{min}, {max}]")
    }
}

/// Integral nonnegative f64 → u64, accepting scientific notation like 1e5.
fn f64_as_u64(x: f64) -> Option<u64> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Some(x as u64)
    } else {
        None
    }
}

fn f64_as_i64(x: f64) -> Option<i64> {
    if x.is_finite() && x.fract() == 0.0 && x >= i64::MIN as f64 && x <= i64::MAX as f64 {
        Some(x as i64)
    } else {
        None
    }
}

/// Validate one raw value against a kind; on success return the
/// canonical JSON value, otherwise record a violation at `path`.
fn validate_kind(kind: Kind, raw: Raw, path: &str, errs: &mut Vec<ConfigViolation>) -> Option<Value> {
    let fail = |errs: &mut Vec<ConfigViolation>, message: String| -> Option<Value> {
        errs.push(ConfigViolation { path: path.to_string(), message });
        None
    };
    match kind {
        Kind::UInt { min, max } => {
            let parsed = match raw {
                Raw::Json(Value::Number(n)) => n.as_u64().or_else(|| n.as_f64().and_then(f64_as_u64)),
                Raw::Json(other) => return fail(errs, format!("expected {}, got {}", uint_range(min, max), type_name(other))),
                Raw::Text(t) => t.parse::<u64>().ok().or_else(|| t.parse::<f64>().ok().and_then(f64_as_u64)),
            };
            match parsed {
                Some(v) if (min..=max).contains(&v) => Some(Value::Number(Number::from(v))),
                Some(v) => fail(errs, format!("expected {}, got {v}", uint_range(min, max))),
                None => fail(errs, format!("expected {}, got {}", uint_range(min, max), raw_text(raw))),
            }
        }
        Kind::Int { min, max } => {
            let parsed = match raw {
                Raw::Json(Value::Number(n)) => n.as_i64().or_else(|| n.as_f64().and_then(f64_as_i64)),
                Raw::Json(other) => return fail(errs, format!("expected an integer in [{min}, {max}], got {}", type_name(other))),
                Raw::Text(t) => t.parse::<i64>().ok().or_else(|| t.parse::<f64>().ok().and_then(f64_as_i64)),
            };
            match parsed {
                Some(v) if (min..=max).contains(&v) => Some(Value::Number(Number::from(v))),
                Some(v) => fail(errs, format!("expected an integer in [{min}, {max}], got {v}")),
                None => fail(errs, format!("expected an integer in [{min}, {max}], got {}", raw_text(raw))),
            }
        }
        Kind::Float { min, max } => {
            let parsed = match raw {
                Raw::Json(Value::Number(n)) => n.as_f64(),
                Raw::Json(other) => return fail(errs, format!("expected a number in [{min}, {max}], got {}", type_name(other))),
                Raw::Text(t) => t.parse::<f64>().ok(),
            };
            match parsed {
                Some(v) if v.is_finite() && v >= min && v <= max => Some(Value::Number(Number::from_f64(v).expect("finite"))),
                Some(v) => fail(errs, format!("expected a number in [{min}, {max}], got {v}")),
                None => fail(errs, format!("expected a number in [{min}, {max}], got {}", raw_text(raw))),
            }
        }
        Kind::Choice(options) => {
            let given = match raw {
                Raw::Json(Value::String(s)) => s.as_str(),
                Raw::Json(other) => return fail(errs, format!("expected one of {options:?}, got {}", type_name(other))),
                Raw::Text(t) => t,
            };
            if options.contains(&given) {
                Some(Value::String(given.to_string()))
            } else {
                fail(errs, format!("expected one of {options:?}, got {given:?}"))
            }
        }
        Kind::FloatList { min, max } => {
            let scalar = Kind::Float { min, max };
            let items: Vec<Option<Value>> = match raw {
                Raw::Json(Value::Array(xs)) => xs
                    .iter()
                    .enumerate()
                    .map(|(i, x)| validate_kind(scalar, Raw::Json(x), &format!("{path}[{i}]"), errs))
                    .collect(),
                // A bare number means a one-element sweep.
                Raw::Json(v @ Value::Number(_)) => vec![validate_kind(scalar, Raw::Json(v), path, errs)],
                Raw::Json(other) => return fail(errs, format!("expected a number or array of numbers in [{min}, {max}], got {}", type_name(other))),
                Raw::Text(t) => t
                    .split(',')
                    .enumerate()
                    .map(|(i, piece)| validate_kind(scalar, Raw::Text(piece.trim()), &format!("{path}[{i}]"), errs))
                    .collect(),
            };
            if items.is_empty() {
                return fail(errs, "expected at least one value".to_string());
            }
            let vals: Option<Vec<Value>> = items.into_iter().collect();
            vals.map(Value::Array)
        }
    }
}

fn raw_text(raw: Raw) -> String {
    match raw {
        Raw::Json(v) => v.to_string(),
        Raw::Text(t) => format!("{t:?}"),
    }
}

/// Where field values come from: a JSON document or parsed CLI flags.
enum Source<'a> {
    Json(&'a Map<String, Value>),
    Cli(&'a ArgMatches),
}

impl<'a> Source<'a> {
    fn get(&self, name: &str) -> Option<Raw<'_>> {
        match self {
            Source::Json(map) => map.get(name).map(Raw::Json),
            Source::Cli(m) => m.get_one::<String>(name).map(|s| Raw::Text(s.as_str())),
        }
    }
}

/// Validate every field of `sub` from `source`, filling defaults,
/// collecting all violations, then apply cross-field rules.
fn assemble(sub: &SubSpec, source: &Source) -> Result<ExperimentConfig> {
    let mut errs: Vec<ConfigViolation> = Vec::new();
    let mut params: BTreeMap<String, Value> = BTreeMap::new();
    let mut common: BTreeMap<&str, Value> = BTreeMap::new();
    for (fields, is_common) in [(sub.fields, false), (COMMON, true)] {
        for f in fields {
            let canon = match source.get(f.name) {
                Some(raw) => validate_kind(f.kind, raw, f.name, &mut errs),
                None => f.default.map(|d| {
                    let mut dummy = Vec::new();
                    validate_kind(f.kind, Raw::Text(d), f.name, &mut dummy).expect("schema defaults are valid")
                }),
            };
            if let Some(v) = canon {
                if is_common {
                    common.insert(f.name, v);
                } else {
                    params.insert(f.name.to_string(), v);
                }
            }
        }
    }
    if let Source::Json(map) = source {
        let known = |k: &str| k == "cmd" || COMMON.iter().any(|f| f.name == k) || sub.fields.iter().any(|f| f.name == k);
        for key in map.keys().filter(|k| !known(k)) {
            errs.push(ConfigViolation {
                path: key.clone(),
                message: format!("unknown key for {:?}", sub.name),
            });
        }
    }
    if errs.is_empty() {
        cross_field(sub.name, &mut params, &mut errs);
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let seed = common["seed"].as_u64().expect("validated seed");
    let out = match common["out"].as_str().expect("validated out") {
        "csv" => OutFormat::Csv,
        _ => OutFormat::Json,
    };
    Ok(ExperimentConfig { cmd: sub.name.to_string(), params, seed, out })
}

/// Constraints that couple several fields; run only on documents with
/// no per-field violations. May inject derived parameters (the
/// six-vertex weight `c`).
fn cross_field(cmd: &str, params: &mut BTreeMap<String, Value>, errs: &mut Vec<ConfigViolation>) {
    let push = |errs: &mut Vec<ConfigViolation>, path: &str, message: String| {
        errs.push(ConfigViolation { path: path.to_string(), message });
    };
    match cmd {
        "ising-corr" => {
            let len = params["len"].as_i64().expect("validated");
            let xmax = params["xmax"].as_u64().expect("validated") as i64;
            if xmax > len - 1 {
                push(errs, "xmax", format!("must be < len = {len}, got {xmax}"));
            }
        }
        "sixv-spectrum" => {
            let n = params["n"].as_u64().expect("validated");
            if n % 2 != 0 {
                push(errs, "n", format!("row width must be even, got {n}"));
            }
            let rmax = params["rmax"].as_u64().expect("validated");
            if rmax > n / 2 {
                push(errs, "rmax", format!("must be <= n/2 = {}, got {rmax}", n / 2));
            }
            match (params.contains_key("q"), params.contains_key("c")) {
                (true, true) => push(errs, "c", "give either q or c, not both".to_string()),
                (false, false) => {
                    params.insert("q".to_string(), Value::Number(Number::from_f64(9.0).expect("finite")));
                }
                _ => {}
            }
            if errs.is_empty() && !params.contains_key("c") {
                let q = params["q"].as_f64().expect("validated");
                match c_of_q(q) {
                    Ok(c) => {
                        params.insert("c".to_string(), Value::Number(Number::from_f64(c).expect("finite")));
                    }
                    Err(e) => push(errs, "q", e.to_string()),
                }
            }
        }
        _ => {}
    }
}

/// Parse and validate a JSON experiment config, reporting **every**
/// violation with a path locator. On success the returned config
/// carries canonical values with all defaults filled in.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let doc: Value = serde_json::from_str(text)?;
    let map = match doc.as_object() {
        Some(m) => m,
        None => {
            return Err(Error::Config(vec![ConfigViolation {
                path: "$".to_string(),
                message: format!("top-level value must be an object, got {}", type_name(&doc)),
            }]))
        }
    };
    let cmd = match map.get("cmd") {
        Some(Value::String(s)) => s.as_str(),
        Some(other) => {
            return Err(Error::Config(vec![ConfigViolation {
                path: "cmd".to_string(),
                message: format!("expected an experiment name string, got {}", type_name(other)),
            }]))
        }
        None => {
            return Err(Error::Config(vec![ConfigViolation {
                path: "cmd".to_string(),
                message: "missing; every config needs a \"cmd\" key".to_string(),
            }]))
        }
    };
    let sub = sub_spec(cmd).ok_or_else(|| {
        let known: Vec<&str> = SCHEMA.iter().map(|s| s.name).collect();
        Error::Config(vec![ConfigViolation {
            path: "cmd".to_string(),
            message: format!("unknown experiment {cmd:?}; known: {known:?}"),
        }])
    })?;
    assemble(sub, &Source::Json(map))
}

// ---------------------------------------------------------------------------
// Config and result types
// ---------------------------------------------------------------------------

/// Output format of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutFormat {
    Json,
    Csv,
}

/// A fully validated experiment: canonical parameters, seed, format.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Subcommand / experiment id.
    pub cmd: String,
    /// Canonical parameters (defaults filled, derived values injected);
    /// `seed` and `out` live outside this map.
    pub params: BTreeMap<String, Value>,
    /// Root RNG seed.
    pub seed: u64,
    /// Output format.
    pub out: OutFormat,
}

impl ExperimentConfig {
    fn u(&self, key: &str) -> u64 {
        self.params[key].as_u64().expect("validated uint")
    }
    fn i(&self, key: &str) -> i64 {
        self.params[key].as_i64().expect("validated int")
    }
    fn f(&self, key: &str) -> f64 {
        self.params[key].as_f64().expect("validated float")
    }
    fn s(&self, key: &str) -> &str {
        self.params[key].as_str().expect("validated choice")
    }
    fn fl(&self, key: &str) -> Vec<f64> {
        self.params[key]
            .as_array()
            .expect("validated list")
            .iter()
            .map(|v| v.as_f64().expect("validated float"))
            .collect()
    }
}

/// One named estimate: value, standard error, sample count. Exact
/// results carry `stderr = 0` and `n = 0` (or a documented count).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRow {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
    pub n: u64,
}

impl EstimateRow {
    fn new(name: impl Into<String>, value: f64, stderr: f64, n: u64) -> Self {
        EstimateRow { name: name.into(), value, stderr, n }
    }
}

/// The result document every run emits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultEnvelope {
    /// Experiment id (the subcommand name).
    pub experiment: String,
    /// Canonical parameter echo.
    pub params: BTreeMap<String, Value>,
    /// The seed the run used.
    pub seed: u64,
    /// Named estimates; nonempty on success.
    pub estimates: Vec<EstimateRow>,
    /// Elapsed wall time in milliseconds (the only nondeterministic field).
    pub runtime_ms: u64,
    /// Crate version that produced the document.
    pub version: String,
}

const HEADER_PERCOLATION: &str = "p,n,estimate,stderr,replicas,seed";
const HEADER_FK: &str = "q,p,n,estimate,stderr,replicas,seed";
const HEADER_ISING: &str = "beta,observable,estimate,stderr,n,seed";
const HEADER_SIXV: &str = "N,n,c,lambda,iters,residual";
const HEADER_GENERIC: &str = "name,value,stderr,n,seed";

fn family_of(experiment: &str) -> Result<Family> {
    sub_spec(experiment)
        .map(|s| s.family)
        .ok_or_else(|| Error::invalid(format!("unknown experiment {experiment:?}")))
}

fn family_header(family: Family) -> &'static str {
    match family {
        Family::Percolation => HEADER_PERCOLATION,
        Family::Fk => HEADER_FK,
        Family::Ising => HEADER_ISING,
        Family::Sixv => HEADER_SIXV,
        Family::Generic => HEADER_GENERIC,
    }
}

fn csv_safe(name: &str) -> Result<&str> {
    if name.contains(',') || name.contains('\n') || name.contains('\r') {
        Err(Error::invalid(format!("estimate name {name:?} cannot appear in CSV")))
    } else {
        Ok(name)
    }
}

fn stripped<'a>(name: &'a str, prefix: &str, family: &str) -> Result<&'a str> {
    name.strip_prefix(prefix).ok_or_else(|| {
        Error::invalid(format!("{family} rows must be named {prefix}<value>, got {name:?}"))
    })
}

fn parse_f64(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::invalid(format!("CSV field {what}: expected a number, got {text:?}")))
}

fn parse_u64(text: &str, what: &str) -> Result<u64> {
    text.trim()
        .parse::<u64>()
        .map_err(|_| Error::invalid(format!("CSV field {what}: expected an integer, got {text:?}")))
}

impl ResultEnvelope {
    /// Pretty JSON document, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serializes");
        s.push('\n');
        s
    }

    /// Parse a JSON document produced by [`Self::to_json`].
    pub fn from_json(text: &str) -> Result<ResultEnvelope> {
        Ok(serde_json::from_str(text)?)
    }

    /// CSV document: `#`-prefixed metadata, one header line, one row
    /// per estimate. Columns depend on the experiment family.
    pub fn to_csv(&self) -> Result<String> {
        let family = family_of(&self.experiment)?;
        let mut s = String::new();
        let _ = writeln!(s, "# experiment: {}", self.experiment);
        let _ = writeln!(s, "# version: {}", self.version);
        let _ = writeln!(s, "# seed: {}", self.seed);
        let _ = writeln!(s, "# runtime_ms: {}", self.runtime_ms);
        let _ = writeln!(s, "# params: {}", serde_json::to_string(&self.params).expect("plain data"));
        let _ = writeln!(s, "{}", family_header(family));
        let param_i64 = |key: &str| -> Result<i64> {
            self.params
                .get(key)
                .and_then(Value::as_i64)
                .ok_or_else(|| Error::invalid(format!("envelope params lack integer {key:?}")))
        };
        let param_f64 = |key: &str| -> Result<f64> {
            self.params
                .get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::invalid(format!("envelope params lack number {key:?}")))
        };
        for row in &self.estimates {
            match family {
                Family::Percolation => {
                    let p = stripped(&row.name, "p=", "percolation")?;
                    let _ = writeln!(s, "{},{},{},{},{},{}", p, param_i64("n")?, row.value, row.stderr, row.n, self.seed);
                }
                Family::Fk => {
                    let p = stripped(&row.name, "p=", "random-cluster")?;
                    let _ = writeln!(s, "{},{},{},{},{},{},{}", param_f64("q")?, p, param_i64("n")?, row.value, row.stderr, row.n, self.seed);
                }
                Family::Ising => {
                    let _ = writeln!(s, "{},{},{},{},{},{}", param_f64("beta")?, csv_safe(&row.name)?, row.value, row.stderr, row.n, self.seed);
                }
                Family::Sixv => {
                    let n_up = stripped(&row.name, "n_up=", "six-vertex")?;
                    let _ = writeln!(s, "{},{},{},{},{},{}", param_i64("n")?, n_up, param_f64("c")?, row.value, row.n, row.stderr);
                }
                Family::Generic => {
                    let _ = writeln!(s, "{},{},{},{},{}", csv_safe(&row.name)?, row.value, row.stderr, row.n, self.seed);
                }
            }
        }
        Ok(s)
    }

    /// Parse a CSV document produced by [`Self::to_csv`];
    /// `from_csv(to_csv(x)) == x`.
    pub fn from_csv(text: &str) -> Result<ResultEnvelope> {
        let mut lines = text.lines();
        let mut meta = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::invalid(format!("CSV truncated before metadata key {key:?}")))?;
            let prefix = format!("# {key}: ");
            line.strip_prefix(&prefix)
                .map(str::to_string)
                .ok_or_else(|| Error::invalid(format!("expected metadata line {prefix:?}…, got {line:?}")))
        };
        let experiment = meta("experiment")?;
        let version = meta("version")?;
        let seed = parse_u64(&meta("seed")?, "seed")?;
        let runtime_ms = parse_u64(&meta("runtime_ms")?, "runtime_ms")?;
        let params: BTreeMap<String, Value> = serde_json::from_str(&meta("params")?)?;
        let family = family_of(&experiment)?;
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("CSV truncated before the column header"))?;
        if header != family_header(family) {
            return Err(Error::invalid(format!(
                "expected header {:?}, got {header:?}",
                family_header(family)
            )));
        }
        let mut estimates = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let need = |k: usize| -> Result<()> {
                if f.len() == k {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("expected {k} columns, got {} in {line:?}", f.len())))
                }
            };
            let row = match family {
                Family::Percolation => {
                    need(6)?;
                    EstimateRow::new(format!("p={}", f[0]), parse_f64(f[2], "estimate")?, parse_f64(f[3], "stderr")?, parse_u64(f[4], "replicas")?)
                }
                Family::Fk => {
                    need(7)?;
                    EstimateRow::new(format!("p={}", f[1]), parse_f64(f[3], "estimate")?, parse_f64(f[4], "stderr")?, parse_u64(f[5], "replicas")?)
                }
                Family::Ising => {
                    need(6)?;
                    EstimateRow::new(f[1], parse_f64(f[2], "estimate")?, parse_f64(f[3], "stderr")?, parse_u64(f[4], "n")?)
                }
                Family::Sixv => {
                    need(6)?;
                    EstimateRow::new(format!("n_up={}", f[1]), parse_f64(f[3], "lambda")?, parse_f64(f[5], "residual")?, parse_u64(f[4], "iters")?)
                }
                Family::Generic => {
                    need(5)?;
                    EstimateRow::new(f[0], parse_f64(f[1], "value")?, parse_f64(f[2], "stderr")?, parse_u64(f[3], "n")?)
                }
            };
            estimates.push(row);
        }
        Ok(ResultEnvelope { experiment, params, seed, estimates, runtime_ms, version })
    }
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

/// Run a validated experiment. Deterministic given `(params, seed)`;
/// only `runtime_ms` varies between runs.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultEnvelope> {
    let start = Instant::now();
    let estimates = match cfg.cmd.as_str() {
        "perco-cross" => run_percolation(cfg, false)?,
        "perco-theta" => run_percolation(cfg, true)?,
        "ising-sample" => run_ising_sample(cfg)?,
        "ising-corr" => run_ising_corr(cfg)?,
        "current-check" => run_current_check(cfg)?,
        "fk-sample" => run_fk_sample(cfg)?,
        "fk-es-check" => run_fk_es_check(cfg)?,
        "sixv-spectrum" => run_sixv_spectrum(cfg)?,
        "osss-verify" => run_osss_verify(cfg)?,
        "phi4-cumulants" => run_phi4_cumulants(cfg)?,
        "blockspin-law" => run_blockspin_law(cfg)?,
        "homotopy-dist" => run_homotopy_dist(cfg)?,
        "embed-check" => run_embed_check(cfg)?,
        "accept" => run_accept(cfg)?,
        other => return Err(Error::invalid(format!("unknown experiment {other:?}"))),
    };
    if estimates.is_empty() {
        return Err(Error::invalid(format!("experiment {:?} produced no estimates", cfg.cmd)));
    }
    for row in &estimates {
        if !row.value.is_finite() || !row.stderr.is_finite() {
            return Err(Error::NumericRange(format!(
                "estimate {:?} is not finite: value {}, stderr {}",
                row.name, row.value, row.stderr
            )));
        }
    }
    Ok(ResultEnvelope {
        experiment: cfg.cmd.clone(),
        params: cfg.params.clone(),
        seed: cfg.seed,
        estimates,
        runtime_ms: start.elapsed().as_millis() as u64,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn run_percolation(cfg: &ExperimentConfig, use_theta: bool) -> Result<Vec<EstimateRow>> {
    let n = cfg.i("n");
    let replicas = cfg.u("replicas");
    cfg.fl("p")
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let mode = if replicas == 0 {
                Mode::Exact
            } else {
                Mode::MonteCarlo { replicas, seed: cfg.seed.wrapping_add(k as u64) }
            };
            let est = if use_theta { theta(n, p, mode)? } else { crossing_probability(n, p, mode)? };
            Ok(EstimateRow::new(format!("p={p}"), est.value, est.stderr, est.replicas))
        })
        .collect()
}

fn run_ising_sample(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let lat = Lattice::torus(cfg.i("l"))?;
    let params = IsingParams::new(cfg.f("beta"), &lat, BoundaryCondition::Free)?;
    let dynamics = match cfg.s("dynamics") {
        "glauber" => Dynamics::Glauber,
        _ => Dynamics::Wolff,
    };
    let opts = McOptions {
        burn_in: cfg.u("burn_in") as usize,
        samples: cfg.u("samples") as usize,
        stride: cfg.u("stride") as usize,
        seed: cfg.seed,
    };
    let init = SpinState::all_plus(lat.n_sites());
    let ms = sample_chain(&params, dynamics, init, opts, magnetization)?;
    let n_sites = lat.n_sites();
    let mag = batch_stats(&ms, 16, |b| b.iter().map(|m| m.abs()).sum::<f64>() / b.len() as f64)?;
    let chi = batch_stats(&ms, 16, |b| susceptibility_from_samples(b, n_sites))?;
    Ok(vec![
        EstimateRow::new("magnetization_abs", mag.value, mag.stderr, ms.len() as u64),
        EstimateRow::new("susceptibility", chi.value, chi.stderr, ms.len() as u64),
    ])
}

fn run_ising_corr(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let len = cfg.i("len");
    let xmax = cfg.u("xmax") as i64;
    let lat = Lattice::chain(len)?;
    let m = enumerate(&EnergyModel::ising(cfg.f("beta"))?, &lat, &BoundaryCondition::Free)?;
    let mut rows = Vec::new();
    let mut xs = Vec::new();
    let mut lys = Vec::new();
    for x in 1..=xmax {
        let v = two_point_exact(&m, &lat, Site::new(0, 0), Site::new(x, 0))?;
        rows.push(EstimateRow::new(format!("corr[x={x}]"), v, 0.0, 0));
        if v > 0.0 {
            xs.push(x as f64);
            lys.push(v.ln());
        }
    }
    // Log-decay fit over the full window, when it is well posed.
    if xs.len() >= 2 {
        let fit = ols_fit(&xs, &lys)?;
        rows.push(EstimateRow::new("fit_slope", fit.slope, 0.0, xs.len() as u64));
        rows.push(EstimateRow::new("fit_intercept", fit.intercept, 0.0, xs.len() as u64));
        rows.push(EstimateRow::new("fit_residual", fit.residual, 0.0, xs.len() as u64));
    }
    Ok(rows)
}

fn named_graph(name: &str) -> Result<Graph> {
    Ok(match name {
        "edge" => Graph::path(2),
        "path3" => Graph::path(3),
        "cycle3" => Graph::cycle(3)?,
        "cycle4" => Graph::cycle(4)?,
        "star3" => Graph::star(3),
        "complete4" => Graph::complete(4),
        "k4-minus" => Graph::k4_minus_edge(),
        "bowtie" => Graph::bowtie(),
        "triangle-pendant" => Graph::triangle_with_pendant(),
        other => return Err(Error::invalid(format!("unknown graph {other:?}"))),
    })
}

fn run_current_check(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let g = named_graph(cfg.s("graph"))?;
    let beta = cfg.f("beta");
    let nmax = cfg.u("nmax") as u32;
    (1..g.n_vertices())
        .map(|v| {
            let cc = current_correlation(&g, beta, &[0, v], nmax)?;
            Ok(EstimateRow::new(format!("corr[0,{v}]"), cc.value, cc.truncation_bound, nmax as u64))
        })
        .collect()
}

fn run_fk_sample(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let n = cfg.i("n");
    let q = cfg.f("q");
    let replicas = cfg.u("replicas");
    cfg.fl("p")
        .into_iter()
        .enumerate()
        .map(|(k, p)| {
            let params = FKParams::uniform(q, p)?;
            let mode = if replicas == 0 {
                Mode::Exact
            } else {
                Mode::MonteCarlo { replicas, seed: cfg.seed.wrapping_add(k as u64) }
            };
            let est = fk_theta(n, &params, mode)?;
            Ok(EstimateRow::new(format!("p={p}"), est.value, est.stderr, est.replicas))
        })
        .collect()
}

fn run_fk_es_check(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let beta = cfg.f("beta");
    let tol = cfg.f("tol");
    let lat = Lattice::grid(cfg.i("w"), cfg.i("h"))?;
    let g = Graph::from_lattice(&lat);
    let m_fk = fk_exact(&g, &FKParams::uniform(2.0, ising_p_from_beta(beta))?)?;
    let m_ising = enumerate(&EnergyModel::ising(beta)?, &lat, &BoundaryCondition::Free)?;
    let sites = lat.sites();
    let mut worst = 0.0f64;
    let mut pairs = 0u64;
    for u in 0..sites.len() {
        for v in u + 1..sites.len() {
            let connect = fk_connect_prob(&g, &m_fk, u, v);
            let ising = two_point_exact(&m_ising, &lat, sites[u], sites[v])?;
            worst = worst.max((connect - ising).abs());
            pairs += 1;
        }
    }
    Ok(vec![
        EstimateRow::new("max_deviation", worst, 0.0, pairs),
        EstimateRow::new("pairs", pairs as f64, 0.0, pairs),
        EstimateRow::new("pass", f64::from(worst <= tol), 0.0, pairs),
    ])
}

fn run_sixv_spectrum(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let n = cfg.u("n") as usize;
    let c = cfg.f("c");
    let rmax = cfg.u("rmax") as usize;
    let tol = cfg.f("tol");
    let max_iters = cfg.u("max_iters") as usize;
    (0..=rmax)
        .map(|r| {
            let n_up = n / 2 - r;
            let block = transfer_block(n, n_up, c)?;
            let eig = leading_eigen(&block, tol, max_iters)?;
            Ok(EstimateRow::new(format!("n_up={n_up}"), eig.lambda, eig.residual, eig.iters as u64))
        })
        .collect()
}

fn run_osss_verify(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let edges = cfg.u("edges") as usize;
    let instances = cfg.u("instances");
    let tol = cfg.f("tol");
    let mut rng = root_rng(cfg.seed);
    let mut min_slack = f64::INFINITY;
    let mut violations = 0u64;
    for _ in 0..instances {
        let inst = random_instance(edges, &mut rng)?;
        let report = osss_verify(&inst.measure, &inst.functional, &inst.tree)?;
        min_slack = min_slack.min(report.slack);
        if report.slack < -tol {
            violations += 1;
        }
    }
    Ok(vec![
        EstimateRow::new("instances", instances as f64, 0.0, instances),
        EstimateRow::new("violations", violations as f64, 0.0, instances),
        EstimateRow::new("min_slack", min_slack, 0.0, instances),
    ])
}

fn run_phi4_cumulants(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let lat = Lattice::torus(cfg.i("l"))?;
    let params = Phi4Params::new(cfg.f("g"), cfg.f("nu"), &lat, BoundaryCondition::Free)?;
    let opts = Phi4RunOptions {
        burn_in: cfg.u("burn_in") as usize,
        samples: cfg.u("sweeps") as usize,
        stride: 1,
        seed: cfg.seed,
        width: None,
    };
    let scale = 1.0 / (lat.n_sites() as f64).sqrt();
    let sums = phi4_observable(&params, &opts, |phi| phi.iter().sum::<f64>() * scale)?;
    let rep = gaussianity_report(&sums)?;
    let n = rep.n as u64;
    Ok(vec![
        EstimateRow::new("mean", rep.mean.value, rep.mean.stderr, n),
        EstimateRow::new("variance", rep.variance.value, rep.variance.stderr, n),
        EstimateRow::new("third_cumulant", rep.third_cumulant.value, rep.third_cumulant.stderr, n),
        EstimateRow::new("fourth_cumulant", rep.fourth_cumulant.value, rep.fourth_cumulant.stderr, n),
        EstimateRow::new("excess_kurtosis", rep.excess_kurtosis.value, rep.excess_kurtosis.stderr, n),
        EstimateRow::new("gaussian_verdict", f64::from(rep.gaussian_verdict), 0.0, n),
    ])
}

fn run_blockspin_law(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let k = cfg.u("k") as usize;
    let law = block_spin_law(&BlockSpinSpec::uniform(k, cfg.f("a"), cfg.f("delta"))?)?;
    let mut rows = vec![
        EstimateRow::new("mean", law.mean(), 0.0, 0),
        EstimateRow::new("variance", law.variance(), 0.0, 0),
    ];
    for (i, &p) in law.pmf().iter().enumerate() {
        let m = i as i64 - k as i64;
        rows.push(EstimateRow::new(format!("P[m={m}]"), p, 0.0, 0));
    }
    Ok(rows)
}

fn run_homotopy_dist(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let samples = cfg.u("samples") as usize;
    let n = cfg.i("n");
    let sweeps = cfg.u("sweeps") as usize;
    let etas = cfg.fl("eta_grid");
    let a = critical_fk_loop_families(n, samples, sweeps, cfg.seed)?;
    let b = critical_fk_loop_families(n, samples, sweeps, cfg.seed.wrapping_add(1))?;
    let report = ensemble_distance(&a, &b, &etas)?;
    let count = report.costs.len() as f64;
    let sem = if report.costs.len() > 1 {
        let var = report
            .costs
            .iter()
            .map(|c| (c - report.mean_cost).powi(2))
            .sum::<f64>()
            / (count - 1.0);
        (var / count).sqrt()
    } else {
        0.0
    };
    let mut rows = vec![EstimateRow::new("matched_cost", report.mean_cost, sem, samples as u64)];
    for &(eta, rate) in &report.per_eta_match_rate {
        rows.push(EstimateRow::new(format!("match_rate[eta={eta}]"), rate, 0.0, samples as u64));
    }
    Ok(rows)
}

fn run_embed_check(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let size = cfg.i("size");
    let amplitude = cfg.f("amplitude");
    let windows = cfg.u("windows");
    let tol = cfg.f("tol");
    let mut worst_dev = 0.0f64;
    let mut worst_diamond = 0.0f64;
    let mut involution_exact = true;
    for w in 0..windows {
        let mut rng = stream_rng(cfg.seed, w);
        let angles: Vec<f64> = (0..=2 * size)
            .map(|_| {
                if amplitude == 0.0 {
                    0.0
                } else {
                    rand::Rng::gen_range(&mut rng, -amplitude..amplitude)
                }
            })
            .collect();
        let alpha = IsoradialSequence::new(-size, angles)?;
        let emb = isoradial_embed(&alpha, (-size, size), (-size, size))?;
        worst_dev = worst_dev.max(check_isoradial(&emb, tol)?.max_deviation);
        for (a, b) in emb.diamond_edges() {
            let pa = emb.position(a).expect("edge endpoints are embedded");
            let pb = emb.position(b).expect("edge endpoints are embedded");
            let len = ((pa.0 - pb.0).powi(2) + (pa.1 - pb.1).powi(2)).sqrt();
            worst_diamond = worst_diamond.max((len - 1.0).abs());
        }
        let j = -size + (w as i64 % (2 * size));
        let twice = swap_rows(&swap_rows(&alpha, j)?, j)?;
        for y in -size..=size {
            involution_exact &= twice.get(y) == alpha.get(y);
        }
    }
    let pass = worst_dev <= tol && worst_diamond <= 1e-12 && involution_exact;
    Ok(vec![
        EstimateRow::new("windows", windows as f64, 0.0, windows),
        EstimateRow::new("max_deviation", worst_dev, 0.0, windows),
        EstimateRow::new("diamond_max_deviation", worst_diamond, 0.0, windows),
        EstimateRow::new("involution_exact", f64::from(involution_exact), 0.0, windows),
        EstimateRow::new("pass", f64::from(pass), 0.0, windows),
    ])
}

fn run_accept(cfg: &ExperimentConfig) -> Result<Vec<EstimateRow>> {
    let tier = Tier::parse(cfg.s("tier"))?;
    let results = acceptance::run_tier(tier);
    let mut rows = Vec::with_capacity(results.len() + 3);
    let (mut passed, mut failed, mut skipped) = (0u64, 0u64, 0u64);
    for r in &results {
        let (word, value) = match r.status {
            Status::Pass => {
                passed += 1;
                ("PASS", 1.0)
            }
            Status::Fail => {
                failed += 1;
                ("FAIL", 0.0)
            }
            Status::Skip => {
                skipped += 1;
                ("SKIP", -1.0)
            }
        };
        eprintln!("{} {} — {}", r.id, word, r.detail);
        rows.push(EstimateRow::new(r.id, value, 0.0, 0));
    }
    rows.push(EstimateRow::new("passed", passed as f64, 0.0, 0));
    rows.push(EstimateRow::new("failed", failed as f64, 0.0, 0));
    rows.push(EstimateRow::new("skipped", skipped as f64, 0.0, 0));
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

/// Long flag for a field: underscores become hyphens.
fn long_flag(name: &'static str) -> &'static str {
    match name {
        "burn_in" => "burn-in",
        "eta_grid" => "eta-grid",
        "max_iters" => "max-iters",
        other => {
            debug_assert!(!other.contains('_'), "add a hyphenated alias for {other}");
            other
        }
    }
}

fn kind_value_name(kind: Kind) -> &'static str {
    match kind {
        Kind::UInt { .. } | Kind::Int { .. } => "N",
        Kind::Float { .. } => "X",
        Kind::Choice(_) => "NAME",
        Kind::FloatList { .. } => "X,Y,…",
    }
}

/// The clap command tree, generated from the schema.
pub fn build_command() -> clap::Command {
    let mut root = clap::Command::new("critlab")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Workbench for two-dimensional lattice statistical mechanics")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in SCHEMA {
        let mut c = clap::Command::new(sub.name).about(sub.about);
        let mut ids: Vec<&'static str> = Vec::new();
        for f in sub.fields.iter().chain(COMMON.iter()) {
            ids.push(f.name);
            let mut help = f.help.to_string();
            if let Some(d) = f.default {
                let _ = write!(help, " [default: {d}]");
            }
            c = c.arg(
                clap::Arg::new(f.name)
                    .long(long_flag(f.name))
                    .value_name(kind_value_name(f.kind))
                    .help(help),
            );
        }
        c = c.arg(
            clap::Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("JSON config file; exclusive with the other flags")
                .conflicts_with_all(ids),
        );
        root = root.subcommand(c);
    }
    root
}

fn load_config(cmd: &str, matches: &ArgMatches) -> Result<ExperimentConfig> {
    if let Some(path) = matches.get_one::<String>("config") {
        let text = std::fs::read_to_string(path)?;
        let cfg = parse_config(&text)?;
        if cfg.cmd != cmd {
            return Err(Error::invalid(format!(
                "config file runs {:?} but the {cmd:?} subcommand was invoked",
                cfg.cmd
            )));
        }
        Ok(cfg)
    } else {
        let sub = sub_spec(cmd).expect("clap accepts only schema subcommands");
        assemble(sub, &Source::Cli(matches))
    }
}

/// Full CLI entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    crate::rng::init_thread_pool();
    let matches = match build_command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            // --help / --version exit 0; usage errors exit 2.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (cmd, sub_matches) = matches.subcommand().expect("subcommand required");
    let cfg = match load_config(cmd, sub_matches) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match run(&cfg) {
        Ok(envelope) => {
            let doc = match cfg.out {
                OutFormat::Json => envelope.to_json(),
                OutFormat::Csv => match envelope.to_csv() {
                    Ok(d) => d,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return e.exit_code();
                    }
                },
            };
            print!("{doc}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli_config(args: &[&str]) -> Result<ExperimentConfig> {
        let matches = build_command()
            .try_get_matches_from(args)
            .expect("test args parse");
        let (cmd, sub) = matches.subcommand().expect("subcommand");
        load_config(cmd, sub)
    }

    #[test]
    fn valid_config_documents_parse_with_defaults() {
        let cfg = parse_config(r#"{"cmd":"perco-cross","n":11,"p":0.5,"replicas":100000,"seed":1}"#).unwrap();
        assert_eq!(cfg.cmd, "perco-cross");
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.out, OutFormat::Json);
        assert_eq!(cfg.i("n"), 11);
        assert_eq!(cfg.fl("p"), vec![0.5]);
        assert_eq!(cfg.u("replicas"), 100_000);

        let cfg = parse_config(r#"{"cmd":"sixv-spectrum","n":12,"q":9,"rmax":3}"#).unwrap();
        assert_eq!(cfg.u("n"), 12);
        assert_eq!(cfg.f("q"), 9.0);
        assert!((cfg.f("c") - 5f64.sqrt()).abs() < 1e-15, "c = sqrt(2 + sqrt 9)");
        assert_eq!(cfg.u("rmax"), 3);
    }

    #[test]
    fn out_of_range_value_is_located_by_path() {
        let err = parse_config(r#"{"cmd":"perco-cross","p":1.5}"#).unwrap_err();
        match err {
            Error::Config(vs) => {
                assert_eq!(vs.len(), 1);
                assert_eq!(vs[0].path, "p");
                assert!(vs[0].message.contains("[0, 1]"), "{}", vs[0].message);
            }
            other => panic!("expected Config, got {other:?}"),
        }
    }

    #[test]
    fn every_violation_is_reported_at_once() {
        let err = parse_config(
            r#"{"cmd":"perco-cross","n":0,"p":[0.2,7.0],"replicas":-3,"bogus":1,"out":"yaml"}"#,
        )
        .unwrap_err();
        let Error::Config(vs) = err else { panic!("expected Config") };
        let paths: Vec<&str> = vs.iter().map(|v| v.path.as_str()).collect();
        for expected in ["n", "p[1]", "replicas", "bogus", "out"] {
            assert!(paths.contains(&expected), "missing path {expected:?} in {paths:?}");
        }
        assert_eq!(vs.len(), 5);
    }

    #[test]
    fn missing_or_unknown_cmd_is_a_violation_at_cmd() {
        for (text, needle) in [
            (r#"{"n": 3}"#, "missing"),
            (r#"{"cmd": "warp-drive"}"#, "unknown experiment"),
            (r#"{"cmd": 7}"#, "expected an experiment name"),
        ] {
            let Error::Config(vs) = parse_config(text).unwrap_err() else {
                panic!("expected Config for {text}")
            };
            assert_eq!(vs[0].path, "cmd");
            assert!(vs[0].message.contains(needle), "{}", vs[0].message);
        }
    }

    #[test]
    fn malformed_json_maps_to_exit_code_2() {
        let err = parse_config("{not json").unwrap_err();
        assert!(matches!(err, Error::Json(_)));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn cross_field_rules_fire_only_on_otherwise_clean_docs() {
        // xmax beyond the chain is caught.
        let Error::Config(vs) = parse_config(r#"{"cmd":"ising-corr","len":5,"xmax":7}"#).unwrap_err() else {
            panic!("expected Config")
        };
        assert_eq!(vs[0].path, "xmax");
        // q and c together are rejected.
        let Error::Config(vs) = parse_config(r#"{"cmd":"sixv-spectrum","q":2.0,"c":1.5}"#).unwrap_err() else {
            panic!("expected Config")
        };
        assert_eq!(vs[0].path, "c");
        // Odd row width is rejected.
        let Error::Config(vs) = parse_config(r#"{"cmd":"sixv-spectrum","n":7}"#).unwrap_err() else {
            panic!("expected Config")
        };
        assert_eq!(vs[0].path, "n");
        // c alone is kept verbatim; no q is injected.
        let cfg = parse_config(r#"{"cmd":"sixv-spectrum","c":1.5}"#).unwrap();
        assert_eq!(cfg.f("c"), 1.5);
        assert!(!cfg.params.contains_key("q"));
        // Neither q nor c defaults to q = 9.
        let cfg = parse_config(r#"{"cmd":"sixv-spectrum"}"#).unwrap();
        assert_eq!(cfg.f("q"), 9.0);
    }

    #[test]
    fn cli_flags_go_through_the_same_validator() {
        let cfg = cli_config(&["critlab", "phi4-cumulants", "--sweeps", "1e5", "--l", "4"]).unwrap();
        assert_eq!(cfg.u("sweeps"), 100_000, "scientific notation for integers");
        assert_eq!(cfg.i("l"), 4);
        assert_eq!(cfg.f("g"), 1.0, "defaults fill in");

        let err = cli_config(&["critlab", "perco-cross", "--p", "0.3,1.7"]).unwrap_err();
        let Error::Config(vs) = err else { panic!("expected Config") };
        assert_eq!(vs[0].path, "p[1]");

        let cfg = cli_config(&["critlab", "ising-sample", "--seed", "7", "--out", "csv"]).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.out, OutFormat::Csv);
        assert_eq!(cfg.f("beta"), crate::ising::beta_c(), "default is the critical point, bit for bit");
    }

    #[test]
    fn run_is_deterministic_modulo_runtime() {
        let cfg = parse_config(r#"{"cmd":"perco-cross","n":3,"p":[0.4,0.6],"replicas":2000,"seed":9}"#).unwrap();
        let mut a = run(&cfg).unwrap();
        let mut b = run(&cfg).unwrap();
        a.runtime_ms = 0;
        b.runtime_ms = 0;
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json(), "byte-identical documents");
        assert_eq!(a.estimates.len(), 2);
    }

    #[test]
    fn json_and_csv_round_trip_for_every_family() {
        // Percolation (run for real, exact mode).
        let cfg = parse_config(r#"{"cmd":"perco-cross","n":1,"p":[0.25,0.5],"replicas":0,"seed":3}"#).unwrap();
        let env = run(&cfg).unwrap();
        assert_eq!(ResultEnvelope::from_json(&env.to_json()).unwrap(), env);
        assert_eq!(ResultEnvelope::from_csv(&env.to_csv().unwrap()).unwrap(), env);

        // Hand-built envelopes for the other families.
        let mk = |experiment: &str, params: &str, rows: Vec<EstimateRow>| ResultEnvelope {
            experiment: experiment.to_string(),
            params: serde_json::from_str(params).unwrap(),
            seed: 11,
            estimates: rows,
            runtime_ms: 42,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let fk = mk(
            "fk-sample",
            r#"{"n":4,"q":2.0,"p":[0.5],"replicas":100}"#,
            vec![EstimateRow::new("p=0.5", 0.25, 0.01, 100)],
        );
        assert_eq!(ResultEnvelope::from_csv(&fk.to_csv().unwrap()).unwrap(), fk);

        let ising = mk(
            "ising-corr",
            r#"{"len":5,"beta":0.5,"xmax":2}"#,
            vec![
                EstimateRow::new("corr[x=1]", 0.46211715726000974, 0.0, 0),
                EstimateRow::new("fit_slope", -0.7719368213843674, 0.0, 2),
            ],
        );
        assert_eq!(ResultEnvelope::from_csv(&ising.to_csv().unwrap()).unwrap(), ising);

        let sixv = mk(
            "sixv-spectrum",
            r#"{"n":4,"c":2.0,"rmax":1,"tol":1e-12}"#,
            vec![
                EstimateRow::new("n_up=2", 6.25, 1e-13, 17),
                EstimateRow::new("n_up=1", 4.0, 5e-14, 12),
            ],
        );
        assert_eq!(ResultEnvelope::from_csv(&sixv.to_csv().unwrap()).unwrap(), sixv);

        let generic = mk(
            "osss-verify",
            r#"{"edges":2,"instances":10,"tol":1e-12}"#,
            vec![
                EstimateRow::new("instances", 10.0, 0.0, 10),
                EstimateRow::new("min_slack", -3.2e-17, 0.0, 10),
            ],
        );
        assert_eq!(ResultEnvelope::from_csv(&generic.to_csv().unwrap()).unwrap(), generic);
    }

    #[test]
    fn csv_has_exactly_one_header_line() {
        let cfg = parse_config(r#"{"cmd":"blockspin-law","k":2,"a":0.3,"out":"csv"}"#).unwrap();
        let env = run(&cfg).unwrap();
        let csv = env.to_csv().unwrap();
        let headers = csv.lines().filter(|l| *l == HEADER_GENERIC).count();
        assert_eq!(headers, 1);
        assert_eq!(csv.lines().filter(|l| l.starts_with('#')).count(), 5);
    }

    #[test]
    fn capacity_and_convergence_errors_keep_their_exit_codes() {
        // Exact theta beyond the supported radius: capacity, exit 3.
        let cfg = parse_config(r#"{"cmd":"perco-theta","n":9,"replicas":0}"#).unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3, "got: {err}");
        // An unreachable iteration budget: convergence, exit 4.
        let cfg = parse_config(r#"{"cmd":"sixv-spectrum","n":6,"q":9,"rmax":0,"max_iters":2}"#).unwrap();
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 4, "got: {err}");
    }

    #[test]
    fn small_experiments_produce_sane_estimates() {
        // Exact crossing at p = 1/2 is exactly 1/2 for the 1-box.
        let cfg = parse_config(r#"{"cmd":"perco-cross","n":1,"replicas":0}"#).unwrap();
        let env = run(&cfg).unwrap();
        assert_eq!(env.estimates[0].value, 0.5);
        assert_eq!(env.params["p"], serde_json::json!([0.5]));

        // Chain correlation matches tanh(beta)^x.
        let cfg = parse_config(r#"{"cmd":"ising-corr","len":6,"beta":0.5,"xmax":3}"#).unwrap();
        let env = run(&cfg).unwrap();
        let t: f64 = 0.5f64.tanh();
        for (row, x) in env.estimates.iter().zip(1..=3) {
            assert_eq!(row.name, format!("corr[x={x}]"));
            assert!((row.value - t.powi(x)).abs() < 1e-12);
        }
        assert_eq!(env.estimates.len(), 6, "3 correlations + 3 fit rows");

        // The single-edge current correlation is tanh(beta).
        let cfg = parse_config(r#"{"cmd":"current-check","graph":"edge","beta":0.5,"nmax":20}"#).unwrap();
        let env = run(&cfg).unwrap();
        assert!((env.estimates[0].value - t).abs() < 1e-8);

        // Block-spin law of a 2-block: P(0) = 2e^{-2a}/Z.
        let cfg = parse_config(r#"{"cmd":"blockspin-law","k":2,"a":0.3,"delta":1.0}"#).unwrap();
        let env = run(&cfg).unwrap();
        let z = 2.0 * 0.6f64.exp() + 2.0 * (-0.6f64).exp();
        let p0 = env.estimates.iter().find(|r| r.name == "P[m=0]").unwrap();
        assert!((p0.value - 2.0 * (-0.6f64).exp() / z).abs() < 1e-12);
    }

    #[test]
    fn config_file_must_match_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"cmd":"perco-theta","n":2}"#).unwrap();
        let err = cli_config(&["critlab", "perco-cross", "--config", path.to_str().unwrap()]).unwrap_err();
        assert!(err.to_string().contains("perco-theta"), "{err}");
        let cfg = cli_config(&["critlab", "perco-theta", "--config", path.to_str().unwrap()]).unwrap();
        assert_eq!(cfg.i("n"), 2);
    }
}
