//! Run configuration, text snapshots with exact-restart sidecars, error
//! norms, convergence tables and the randomized audits of `check` mode.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dg_operator::{
    cfl_warning, weak_pcp_dt_bound, BoundaryKind, BoundarySpec, DgOperator, FieldState,
};
use crate::eos::EosSpec;
use crate::error::{Error, Result};
use crate::grid::{CartesianMesh, Discretization, ElementSolution, MAX_MAG, MAX_SCALAR};
use crate::pcp_limiter::{cell_eps, pcp_limit_cell, DEFAULT_EPS};
use crate::physics::{
    margin_scale, normal_flux_from_parts, split_flux_margin, xi_star_margin, UnitNormal,
};
use crate::problems::{make_problem, ProblemSpec, PARAM_KEYS};
use crate::sampling::{random_admissible_cell, random_cell, random_primitive, random_star};
use crate::state::{
    conserved_from_primitive, g1_report, primitive_from_conserved, primitive_from_conserved_near,
    ConservedState, NCOMP, RECOVERY_TOL,
};
use crate::time_integrator::{apply_limiters, run, Breakdown, LimiterConfig, RunParams, StepLog};

/// Recognized configuration keys (problem parameters such as `Ba` are
/// accepted as well).
pub const CONFIG_KEYS: [&str; 16] = [
    "problem",
    "N",
    "Nx",
    "Ny",
    "k",
    "cfl",
    "gamma",
    "t_end",
    "pcp",
    "tvb_m",
    "eps",
    "snapshot_times",
    "out_dir",
    "a",
    "audit",
    "max_steps",
];

pub const DEFAULT_CFL: f64 = 0.15;
pub const DEFAULT_TVB_M: f64 = 1.0;

/// Raw `key -> value` entries before validation.
pub type RawConfig = BTreeMap<String, String>;

/// Split `key=value`.
pub fn parse_assignment(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::config(s, "expected key=value"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::config(s, "empty key"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// Parse configuration text: TOML, or whitespace-separated `key=value`
/// tokens with `#` comments.
pub fn parse_config_text(text: &str) -> Result<RawConfig> {
    if let Ok(table) = text.parse::<toml::Table>() {
        let mut raw = RawConfig::new();
        for (k, v) in table {
            let s = match v {
                toml::Value::String(s) => s,
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => f.to_string(),
                toml::Value::Boolean(b) => if b { "on" } else { "off" }.to_string(),
                toml::Value::Array(items) => {
                    let parts: Vec<String> = items
                        .iter()
                        .map(|x| match x {
                            toml::Value::Integer(i) => Ok(i.to_string()),
                            toml::Value::Float(f) => Ok(f.to_string()),
                            _ => Err(Error::config(k.clone(), "array entries must be numbers")),
                        })
                        .collect::<Result<_>>()?;
                    parts.join(",")
                }
                _ => return Err(Error::config(k, "unsupported value type")),
            };
            raw.insert(k, s);
        }
        return Ok(raw);
    }
    let mut raw = RawConfig::new();
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("");
        for token in line.split_whitespace() {
            let (k, v) = parse_assignment(token)?;
            raw.insert(k, v);
        }
    }
    Ok(raw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub params: BTreeMap<String, f64>,
    pub nx: usize,
    pub ny: usize,
    pub k: usize,
    pub cfl: f64,
    pub gamma: f64,
    pub t_end: f64,
    pub pcp: bool,
    /// `None` disables the oscillation limiter.
    pub tvb_m: Option<f64>,
    pub eps: f64,
    pub a: f64,
    pub snapshot_times: Vec<f64>,
    pub out_dir: PathBuf,
    pub audit: bool,
    pub max_steps: Option<usize>,
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse::<T>()
        .map_err(|_| Error::config(key, format!("cannot parse `{v}`")))
}

fn parse_switch(key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "on" | "true" | "yes" | "1" => Ok(true),
        "off" | "false" | "no" | "0" => Ok(false),
        _ => Err(Error::config(key, format!("expected on or off, got `{v}`"))),
    }
}

fn parse_times(key: &str, v: &str) -> Result<Vec<f64>> {
    let v = v.trim().trim_start_matches('[').trim_end_matches(']');
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| parse_num::<f64>(key, t.trim()))
        .collect()
}

impl RunConfig {
    /// Validate raw entries and fill defaults from the problem.
    pub fn resolve(raw: &RawConfig) -> Result<(RunConfig, ProblemSpec)> {
        let mut params = BTreeMap::new();
        for (k, v) in raw {
            if PARAM_KEYS.contains(&k.as_str()) {
                params.insert(k.clone(), parse_num::<f64>(k, v)?);
            } else if !CONFIG_KEYS.contains(&k.as_str()) {
                return Err(Error::config(k.clone(), "unknown key"));
            }
        }
        let get = |k: &str| raw.get(k).map(String::as_str);
        let problem = get("problem")
            .ok_or_else(|| Error::config("problem", "missing"))?
            .to_string();
        let mut spec = make_problem(&problem, &params)?;

        let (mut nx, mut ny) = spec.cells;
        if let Some(v) = get("N") {
            let n = parse_num::<usize>("N", v)?;
            (nx, ny) = (n, n);
        }
        if let Some(v) = get("Nx") {
            nx = parse_num("Nx", v)?;
        }
        if let Some(v) = get("Ny") {
            ny = parse_num("Ny", v)?;
        }
        if nx == 0 || ny == 0 {
            return Err(Error::config("N", "cell counts must be positive"));
        }
        let k = get("k")
            .map(|v| parse_num::<usize>("k", v))
            .transpose()?
            .unwrap_or(2);
        if k > 2 {
            return Err(Error::config(
                "k",
                format!("degree must be 0, 1 or 2, got {k}"),
            ));
        }
        let cfl = get("cfl")
            .map(|v| parse_num::<f64>("cfl", v))
            .transpose()?
            .unwrap_or(DEFAULT_CFL);
        if !(cfl > 0.0) {
            return Err(Error::config("cfl", "must be positive"));
        }
        if let Some(v) = get("gamma") {
            let g = parse_num::<f64>("gamma", v)?;
            spec.eos = EosSpec::ideal(g).map_err(|e| Error::config("gamma", e.to_string()))?;
        }
        let t_end = get("t_end")
            .map(|v| parse_num::<f64>("t_end", v))
            .transpose()?
            .unwrap_or(spec.t_end);
        if !(t_end >= 0.0) {
            return Err(Error::config("t_end", "must be nonnegative"));
        }
        let pcp = get("pcp")
            .map(|v| parse_switch("pcp", v))
            .transpose()?
            .unwrap_or(true);
        let tvb_m = match get("tvb_m") {
            None => spec.oscillation_limiter.then_some(DEFAULT_TVB_M),
            Some(v) if matches!(v.to_ascii_lowercase().as_str(), "off" | "none") => None,
            Some(v) => {
                let m = parse_num::<f64>("tvb_m", v)?;
                if !(m >= 0.0) {
                    return Err(Error::config("tvb_m", "must be nonnegative"));
                }
                Some(m)
            }
        };
        let eps = get("eps")
            .map(|v| parse_num::<f64>("eps", v))
            .transpose()?
            .unwrap_or(DEFAULT_EPS);
        if !(eps > 0.0) {
            return Err(Error::config("eps", "must be positive"));
        }
        let a = get("a")
            .map(|v| parse_num::<f64>("a", v))
            .transpose()?
            .unwrap_or(crate::physics::LIGHT_SPEED);
        if !(a > 0.0) {
            return Err(Error::config("a", "must be positive"));
        }
        let snapshot_times = get("snapshot_times")
            .map(|v| parse_times("snapshot_times", v))
            .transpose()?
            .unwrap_or_default();
        let out_dir = PathBuf::from(get("out_dir").unwrap_or("out"));
        let audit = get("audit")
            .map(|v| parse_switch("audit", v))
            .transpose()?
            .unwrap_or(false);
        let max_steps = get("max_steps")
            .map(|v| parse_num::<usize>("max_steps", v))
            .transpose()?;
        let cfg = RunConfig {
            problem,
            params,
            nx,
            ny,
            k,
            cfl,
            gamma: spec.eos.gamma(),
            t_end,
            pcp,
            tvb_m,
            eps,
            a,
            snapshot_times,
            out_dir,
            audit,
            max_steps,
        };
        Ok((cfg, spec))
    }

    pub fn limiter(&self) -> LimiterConfig {
        LimiterConfig {
            pcp: self.pcp,
            tvb_m: self.tvb_m,
            eps: self.eps,
        }
    }

    pub fn discretization(&self, spec: &ProblemSpec) -> Result<Arc<Discretization>> {
        Ok(Arc::new(Discretization::new(
            spec.mesh(self.nx, self.ny)?,
            self.k,
        )?))
    }

    pub fn warnings(&self, disc: &Discretization) -> Vec<String> {
        let mut w: Vec<String> = cfl_warning(disc, self.cfl).into_iter().collect();
        if !self.pcp {
            w.push(
                "positivity limiter disabled; the run stops at the first inadmissible cell mean"
                    .into(),
            );
        }
        w
    }

    /// Resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        let mut t = toml::Table::new();
        t.insert("problem".into(), self.problem.clone().into());
        for (k, v) in &self.params {
            t.insert(k.clone(), (*v).into());
        }
        t.insert("Nx".into(), (self.nx as i64).into());
        t.insert("Ny".into(), (self.ny as i64).into());
        t.insert("k".into(), (self.k as i64).into());
        t.insert("cfl".into(), self.cfl.into());
        t.insert("gamma".into(), self.gamma.into());
        t.insert("t_end".into(), self.t_end.into());
        t.insert("pcp".into(), if self.pcp { "on" } else { "off" }.into());
        t.insert(
            "tvb_m".into(),
            self.tvb_m
                .map_or_else(|| toml::Value::from("off"), toml::Value::from),
        );
        t.insert("eps".into(), self.eps.into());
        t.insert("a".into(), self.a.into());
        t.insert(
            "snapshot_times".into(),
            toml::Value::Array(self.snapshot_times.iter().map(|x| (*x).into()).collect()),
        );
        t.insert("out_dir".into(), self.out_dir.display().to_string().into());
        t.insert("audit".into(), self.audit.into());
        if let Some(m) = self.max_steps {
            t.insert("max_steps".into(), (m as i64).into());
        }
        toml::to_string(&t).expect("plain table serializes")
    }
}

/// Read an optional config file, then apply flag entries on top.
pub fn parse_config(
    file: Option<&Path>,
    flags: &[(String, String)],
) -> Result<(RunConfig, ProblemSpec)> {
    let mut raw = match file {
        Some(p) => parse_config_text(&fs::read_to_string(p)?)?,
        None => RawConfig::new(),
    };
    for (k, v) in flags {
        raw.insert(k.clone(), v.clone());
    }
    RunConfig::resolve(&raw)
}

// ---------------------------------------------------------------- snapshots

pub const SNAPSHOT_COLUMNS: &str = "i j x y rho v1 v2 v3 p B1 B2 B3 D m1 m2 m3 E";

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub time: f64,
    pub nx: usize,
    pub ny: usize,
    pub gamma: f64,
    pub k: usize,
    pub problem: String,
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl SnapshotHeader {
    pub fn of(state: &FieldState, eos: &EosSpec, problem: &str) -> Self {
        let m = &state.disc.mesh;
        Self {
            time: state.time,
            nx: m.nx,
            ny: m.ny,
            gamma: eos.gamma(),
            k: state.disc.k(),
            problem: problem.to_string(),
            x: [m.x_min, m.x_max],
            y: [m.y_min, m.y_max],
        }
    }

    fn lines(&self) -> String {
        format!(
            "# time={:e} Nx={} Ny={} gamma={:e} k={}\n# problem={} x_min={:e} x_max={:e} y_min={:e} y_max={:e}\n",
            self.time, self.nx, self.ny, self.gamma, self.k, self.problem, self.x[0], self.x[1], self.y[0], self.y[1]
        )
    }

    fn parse(first: &str, second: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for line in [first, second] {
            let body = line
                .strip_prefix('#')
                .ok_or_else(|| Error::Format(format!("expected a header line, got `{line}`")))?;
            for token in body.split_whitespace() {
                let (k, v) = token
                    .split_once('=')
                    .ok_or_else(|| Error::Format(format!("bad header token `{token}`")))?;
                kv.insert(k.to_string(), v.to_string());
            }
        }
        let field = |k: &str| {
            kv.get(k)
                .ok_or_else(|| Error::Format(format!("header is missing `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            field(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad header value for `{k}`")))
        };
        let int = |k: &str| -> Result<usize> {
            field(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad header value for `{k}`")))
        };
        Ok(Self {
            time: num("time")?,
            nx: int("Nx")?,
            ny: int("Ny")?,
            gamma: num("gamma")?,
            k: int("k")?,
            problem: field("problem")?.clone(),
            x: [num("x_min")?, num("x_max")?],
            y: [num("y_min")?, num("y_max")?],
        })
    }

    pub fn discretization(&self) -> Result<Arc<Discretization>> {
        Ok(Arc::new(Discretization::new(
            CartesianMesh::new(self.x, self.y, self.nx, self.ny)?,
            self.k,
        )?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRow {
    pub i: usize,
    pub j: usize,
    pub x: f64,
    pub y: f64,
    /// `rho v1 v2 v3 p B1 B2 B3` recovered from the cell mean.
    pub prim: [f64; 8],
    /// Conserved cell mean.
    pub cons: [f64; NCOMP],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub header: SnapshotHeader,
    pub rows: Vec<SnapshotRow>,
}

/// Companion file holding the full modal coefficients.
pub fn modal_path(path: &Path) -> PathBuf {
    path.with_extension("modal")
}

fn prim_array(u: &ConservedState, eos: &EosSpec) -> [f64; 8] {
    match primitive_from_conserved(u, eos, RECOVERY_TOL) {
        Ok(p) => [p.rho, p.v[0], p.v[1], p.v[2], p.p, p.b[0], p.b[1], p.b[2]],
        Err(_) => [f64::NAN; 8],
    }
}

/// Write the text snapshot and its `.modal` sidecar. Cells whose mean
/// cannot be recovered get `NaN` primitives.
pub fn write_snapshot(state: &FieldState, eos: &EosSpec, problem: &str, path: &Path) -> Result<()> {
    let header = SnapshotHeader::of(state, eos, problem);
    let mesh = &state.disc.mesh;
    let mut text = header.lines();
    writeln!(text, "# {SNAPSHOT_COLUMNS}").unwrap();
    let mut modal = header.lines();
    for (idx, cell) in state.cells.iter().enumerate() {
        let (i, j) = mesh.ij(idx);
        let (x, y) = mesh.center(i, j);
        let mean = cell.mean();
        write!(text, "{i} {j} {x:.16e} {y:.16e}").unwrap();
        for v in prim_array(&mean, eos).iter().chain(mean.0.iter()) {
            write!(text, " {v:.16e}").unwrap();
        }
        text.push('\n');
        write!(modal, "{i} {j}").unwrap();
        for v in cell.scalar.iter().flatten().chain(cell.mag.iter()) {
            write!(modal, " {v:e}").unwrap();
        }
        modal.push('\n');
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    fs::write(modal_path(path), modal)?;
    Ok(())
}

fn header_and_body(text: &str) -> Result<(SnapshotHeader, impl Iterator<Item = &str>)> {
    let mut lines = text.lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Format("empty file".into()))?;
    let second = lines
        .next()
        .ok_or_else(|| Error::Format("truncated header".into()))?;
    let header = SnapshotHeader::parse(first, second)?;
    Ok((
        header,
        lines.filter(|l| !l.starts_with('#') && !l.trim().is_empty()),
    ))
}

fn parse_fields(line: &str, n: usize, row: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = line
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::Format(format!("row {row}: cannot parse `{t}`")))
        })
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(Error::Format(format!(
            "row {row}: expected {n} columns, found {}",
            vals.len()
        )));
    }
    Ok(vals)
}

fn check_index(vals: &[f64], header: &SnapshotHeader, row: usize) -> Result<(usize, usize)> {
    let (i, j) = (vals[0] as usize, vals[1] as usize);
    if (i, j) != (row % header.nx, row / header.nx) {
        return Err(Error::Format(format!(
            "row {row}: unexpected cell index ({i}, {j})"
        )));
    }
    Ok((i, j))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let text = fs::read_to_string(path)?;
    let (header, body) = header_and_body(&text)?;
    let mut rows = Vec::with_capacity(header.nx * header.ny);
    for (r, line) in body.enumerate() {
        let vals = parse_fields(line, 20, r)?;
        let (i, j) = check_index(&vals, &header, r)?;
        let mut prim = [0.0; 8];
        prim.copy_from_slice(&vals[4..12]);
        let mut cons = [0.0; NCOMP];
        cons.copy_from_slice(&vals[12..20]);
        rows.push(SnapshotRow {
            i,
            j,
            x: vals[2],
            y: vals[3],
            prim,
            cons,
        });
    }
    if rows.len() != header.nx * header.ny {
        return Err(Error::Format(format!(
            "expected {} rows, found {}",
            header.nx * header.ny,
            rows.len()
        )));
    }
    Ok(Snapshot { header, rows })
}

/// Rebuild the full field from a `.modal` file (either path is accepted).
pub fn read_modal(path: &Path) -> Result<(SnapshotHeader, FieldState)> {
    let text = fs::read_to_string(modal_path(path))?;
    let (header, body) = header_and_body(&text)?;
    let ncoef = 6 * MAX_SCALAR + MAX_MAG;
    let mut cells = Vec::with_capacity(header.nx * header.ny);
    for (r, line) in body.enumerate() {
        let vals = parse_fields(line, 2 + ncoef, r)?;
        check_index(&vals, &header, r)?;
        let mut c = ElementSolution::ZERO;
        for b in 0..6 {
            c.scalar[b].copy_from_slice(&vals[2 + b * MAX_SCALAR..2 + (b + 1) * MAX_SCALAR]);
        }
        c.mag.copy_from_slice(&vals[2 + 6 * MAX_SCALAR..]);
        cells.push(c);
    }
    let disc = header.discretization()?;
    let state =
        FieldState::new(disc, cells, header.time).map_err(|e| Error::Format(e.to_string()))?;
    Ok((header, state))
}

// -------------------------------------------------------------- error norms

pub const PRIMITIVE_NAMES: [&str; 8] = ["rho", "v1", "v2", "v3", "p", "B1", "B2", "B3"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// Per primitive variable, in the order of [`PRIMITIVE_NAMES`].
    pub l1: [f64; 8],
    pub l2: [f64; 8],
}

/// Area-weighted `l1` and `l2` norms of the pointwise primitive error,
/// integrated with the interior Gauss rule in every cell (a subset of
/// `S_K`, so limited fields are admissible there).
pub fn error_norms(
    state: &FieldState,
    eos: &EosSpec,
    exact: &dyn Fn(f64, f64, f64) -> crate::state::PrimitiveState,
    t: f64,
) -> Result<ErrorNorms> {
    let disc = &*state.disc;
    let mesh = &disc.mesh;
    let mut l1 = [0.0; 8];
    let mut l2 = [0.0; 8];
    for (idx, cell) in state.cells.iter().enumerate() {
        let (i, j) = mesh.ij(idx);
        let mut theta = f64::NAN;
        for (p, w) in disc.quad.interior.iter().zip(&disc.quad.interior_weights) {
            let u = cell.eval(p);
            let (num, th) = primitive_from_conserved_near(&u, eos, RECOVERY_TOL, theta)?;
            theta = th;
            let (x, y) = mesh.to_physical(i, j, p.xi, p.eta);
            let ex = exact(x, y, t);
            let a = [
                num.rho, num.v[0], num.v[1], num.v[2], num.p, num.b[0], num.b[1], num.b[2],
            ];
            let b = [
                ex.rho, ex.v[0], ex.v[1], ex.v[2], ex.p, ex.b[0], ex.b[1], ex.b[2],
            ];
            for c in 0..8 {
                let e = (a[c] - b[c]).abs();
                l1[c] += w * e;
                l2[c] += w * e * e;
            }
        }
    }
    let n = state.cells.len() as f64;
    for c in 0..8 {
        l1[c] /= n;
        l2[c] = (l2[c] / n).sqrt();
    }
    Ok(ErrorNorms { l1, l2 })
}

// ---------------------------------------------------------- run driver

/// Project the initial data and apply the limiters.
pub fn initial_state(
    spec: &ProblemSpec,
    disc: Arc<Discretization>,
    op: &DgOperator,
    lim: &LimiterConfig,
) -> Result<FieldState> {
    let mut st = spec.project_initial(disc)?;
    apply_limiters(&mut st, op, lim)?;
    Ok(st)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub final_state: FieldState,
    pub steps: usize,
    pub log: Vec<StepLog>,
    pub breakdown: Option<Breakdown>,
    pub audit_violations: Option<usize>,
    pub snapshots: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn snapshot_name(index: usize) -> String {
    format!("snapshot_{index:03}.txt")
}

/// Full driver: echo the config, initialize (or restart), step with
/// snapshots, write the run log and a final snapshot.
pub fn run_configured(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    restart: Option<&Path>,
) -> Result<RunSummary> {
    fs::create_dir_all(&cfg.out_dir)?;
    let mut op = DgOperator::new(spec.bc.clone(), spec.eos)?;
    op.a = cfg.a;
    let lim = cfg.limiter();
    let state = match restart {
        Some(path) => {
            let (header, st) = read_modal(path)?;
            if header.problem != spec.name {
                return Err(Error::Format(format!(
                    "restart file is for `{}`, not `{}`",
                    header.problem, spec.name
                )));
            }
            st
        }
        None => initial_state(spec, cfg.discretization(spec)?, &op, &lim)?,
    };
    let warnings = cfg.warnings(&state.disc);
    let mut echo = String::new();
    for w in &warnings {
        writeln!(echo, "# warning: {w}").unwrap();
    }
    echo.push_str(&cfg.to_toml());
    fs::write(cfg.out_dir.join("config.toml"), echo)?;

    let params = RunParams {
        t_end: cfg.t_end,
        cfl: cfg.cfl,
        limiter: lim,
        snapshot_times: cfg.snapshot_times.clone(),
        audit: cfg.audit,
        max_steps: cfg.max_steps,
    };
    let mut snapshots = Vec::new();
    let out = run(state, &op, &params, |st| {
        let path = cfg.out_dir.join(snapshot_name(snapshots.len()));
        write_snapshot(st, &spec.eos, &spec.name, &path)?;
        snapshots.push(path);
        Ok(())
    })?;
    let mut log = String::from(StepLog::HEADER);
    log.push('\n');
    for l in &out.log {
        log.push_str(&l.line());
        log.push('\n');
    }
    if let Some(b) = &out.breakdown {
        writeln!(
            log,
            "# breakdown at step {} time {:e}: {}",
            b.step, b.time, b.message
        )
        .unwrap();
    }
    fs::write(cfg.out_dir.join("run.log"), log)?;
    let final_path = cfg.out_dir.join("final.txt");
    write_snapshot(&out.state, &spec.eos, &spec.name, &final_path)?;
    snapshots.push(final_path);
    Ok(RunSummary {
        final_state: out.state,
        steps: out.steps,
        log: out.log,
        breakdown: out.breakdown,
        audit_violations: out.audit.map(|a| a.violations),
        snapshots,
        warnings,
    })
}

// -------------------------------------------------------- convergence

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub l1: f64,
    pub l2: f64,
    pub order_l1: Option<f64>,
    pub order_l2: Option<f64>,
}

/// Variable whose error is tabulated: density, or `B1` for the Alfven
/// wave whose density is constant.
pub fn convergence_variable(problem: &str) -> usize {
    match problem {
        "alfven" => 5,
        _ => 0,
    }
}

/// `log2` ratios between successive rows (grids assumed to double).
pub fn fill_orders(rows: &mut [ConvergenceRow]) {
    for r in 1..rows.len() {
        let ratio = (rows[r - 1].n as f64 / rows[r].n as f64).log2().abs();
        rows[r].order_l1 = Some((rows[r - 1].l1 / rows[r].l1).log2() / ratio);
        rows[r].order_l2 = Some((rows[r - 1].l2 / rows[r].l2).log2() / ratio);
    }
}

/// Run `spec` on `N x N` grids and tabulate the errors at `t_end`.
/// `on_row` is called after each grid (for progress output).
pub fn convergence_suite(
    spec: &ProblemSpec,
    grids: &[usize],
    t_end: f64,
    k: usize,
    cfl: f64,
    lim: &LimiterConfig,
    mut on_row: impl FnMut(&ConvergenceRow),
) -> Result<Vec<ConvergenceRow>> {
    let exact = spec.exact.clone().ok_or_else(|| {
        Error::config("problem", format!("`{}` has no exact solution", spec.name))
    })?;
    let var = convergence_variable(&spec.name);
    let op = DgOperator::new(spec.bc.clone(), spec.eos)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &n in grids {
        let disc = Arc::new(Discretization::new(spec.mesh(n, n)?, k)?);
        let st = initial_state(spec, disc, &op, lim)?;
        let params = RunParams {
            t_end,
            cfl,
            limiter: *lim,
            snapshot_times: Vec::new(),
            audit: false,
            max_steps: None,
        };
        let out = run(st, &op, &params, |_| Ok(()))?;
        if let Some(b) = out.breakdown {
            return Err(Error::Inadmissible(format!(
                "N = {n}: breakdown at t = {:e}: {}",
                b.time, b.message
            )));
        }
        let norms = error_norms(&out.state, &spec.eos, &*exact, t_end)?;
        rows.push(ConvergenceRow {
            n,
            l1: norms.l1[var],
            l2: norms.l2[var],
            order_l1: None,
            order_l2: None,
        });
        fill_orders(&mut rows);
        on_row(rows.last().expect("just pushed"));
    }
    Ok(rows)
}

pub fn format_convergence_table(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("# N l1 l2 order_l1 order_l2\n");
    for r in rows {
        write!(s, "{} {:.6e} {:.6e}", r.n, r.l1, r.l2).unwrap();
        if let (Some(a), Some(b)) = (r.order_l1, r.order_l2) {
            write!(s, " {a:.4} {b:.4}").unwrap();
        }
        s.push('\n');
    }
    s
}

// ------------------------------------------------------------ check mode

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub samples: usize,
    /// Smallest margin divided by its round-off scale.
    pub xi_star_worst: f64,
    pub split_flux_worst: f64,
    pub convexity_failures: usize,
    pub limiter_max_drift: f64,
    pub limiter_failures: usize,
    pub weak_pcp_fields: usize,
    pub weak_pcp_failures: usize,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.xi_star_worst >= -1e-12
            && self.split_flux_worst >= -1e-12
            && self.convexity_failures == 0
            && self.limiter_max_drift <= 1e-13
            && self.limiter_failures == 0
            && self.weak_pcp_failures == 0
    }

    pub fn lines(&self) -> Vec<String> {
        vec![
            format!(
                "xi* margin          min normalized margin {:+.3e} over {} samples",
                self.xi_star_worst, self.samples
            ),
            format!(
                "split-flux margin   min normalized margin {:+.3e} over {} samples",
                self.split_flux_worst, self.samples
            ),
            format!(
                "convexity           {} failures over {} pairs",
                self.convexity_failures, self.samples
            ),
            format!(
                "limiter             max mean drift {:.3e}, {} inadmissible outputs",
                self.limiter_max_drift, self.limiter_failures
            ),
            format!(
                "weak PCP            {} failing cells over {} fields",
                self.weak_pcp_failures, self.weak_pcp_fields
            ),
        ]
    }
}

fn random_gamma(rng: &mut impl Rng) -> EosSpec {
    EosSpec::ideal(1.0 + rng.gen_range(0.05..=1.0)).expect("gamma in (1, 2]")
}

/// Sampled inequality margins (`samples` each) and pairwise convexity of
/// the admissible set.
pub fn check_inequalities(samples: usize, seed: u64, report: &mut CheckReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    report.samples = samples;
    report.xi_star_worst = f64::INFINITY;
    report.split_flux_worst = f64::INFINITY;
    for _ in 0..samples {
        let eos = random_gamma(&mut rng);
        let prim = random_primitive(&mut rng);
        let u = conserved_from_primitive(&prim, &eos)?;
        let (v, b) = random_star(&mut rng);
        let m = xi_star_margin(&u, &v, &b, &eos)?;
        report.xi_star_worst = report.xi_star_worst.min(m / margin_scale(&u, &v, &b));

        let theta = rng.gen_range(-1.0..=1.0);
        let n = UnitNormal::from_angle(rng.gen_range(0.0..std::f64::consts::TAU));
        let m = split_flux_margin(&u, theta, &n, &v, &b, &eos)?;
        let nf = normal_flux_from_parts(&u, &prim, &n);
        report.split_flux_worst = report
            .split_flux_worst
            .min(m / (margin_scale(&u, &v, &b) + margin_scale(&nf, &v, &b)));

        let u2 = conserved_from_primitive(&random_primitive(&mut rng), &eos)?;
        let lam = rng.gen_range(0.0..=1.0);
        if !g1_report(&(u * lam + u2 * (1.0 - lam)), 0.0).admissible {
            report.convexity_failures += 1;
        }
    }
    Ok(())
}

/// Random positivity-limiter calls: relative mean drift and admissibility
/// of every `S_K` value.
pub fn check_limiter(samples: usize, seed: u64, report: &mut CheckReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = Discretization::new(CartesianMesh::new([0.0, 1.0], [0.0, 1.0], 4, 4)?, 2)?;
    for _ in 0..samples {
        let eos = random_gamma(&mut rng);
        let amp = rng.gen_range(0.01..2.0);
        let cell = random_cell(&mut rng, &eos, amp);
        let eps = cell_eps(DEFAULT_EPS, &cell.mean());
        let (out, _) = pcp_limit_cell(&cell, &disc.quad, eps)?;
        let (m0, m1) = (cell.mean(), out.mean());
        for c in 0..NCOMP {
            let drift = (m0[c] - m1[c]).abs() / m0.max_abs();
            report.limiter_max_drift = report.limiter_max_drift.max(drift);
        }
        if !disc
            .quad
            .sk
            .iter()
            .all(|p| g1_report(&out.eval(p), eps).admissible)
        {
            report.limiter_failures += 1;
        }
    }
    Ok(())
}

/// One forward-Euler cell-average update of a random admissible field with
/// the step at 0.99 of the weak-positivity bound. Returns failing cells.
pub fn weak_pcp_trial(rng: &mut impl Rng) -> Result<usize> {
    let n = rng.gen_range(2..=5);
    let k = rng.gen_range(0..=2);
    let (w, h) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    let disc = Arc::new(Discretization::new(
        CartesianMesh::new([0.0, w], [0.0, h], n, n)?,
        k,
    )?);
    let eos = random_gamma(rng);
    let kinds = [
        BoundaryKind::Periodic,
        BoundaryKind::Outflow,
        BoundaryKind::Reflecting,
    ];
    let bc = match rng.gen_range(0..kinds.len()) {
        0 => BoundarySpec::periodic(),
        i => BoundarySpec::all(kinds[i]),
    };
    let cells = (0..disc.mesh.n_cells())
        .map(|_| random_admissible_cell(rng, &eos, &disc.quad, disc.k(), DEFAULT_EPS))
        .collect::<Result<Vec<_>>>()?;
    let state = FieldState::new(disc.clone(), cells, 0.0)?;
    let op = DgOperator::new(bc, eos)?;
    let r = op.residual(&state)?;
    let dt = 0.99 * weak_pcp_dt_bound(&disc, op.a, r.sigma_max);
    let mut failures = 0;
    for (cell, rhs) in state.cells.iter().zip(&r.rhs) {
        let next = cell.mean() + rhs.mean() * dt;
        if !g1_report(&next, 0.0).admissible {
            failures += 1;
        }
    }
    Ok(failures)
}

pub fn check_weak_pcp(fields: usize, seed: u64, report: &mut CheckReport) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..fields {
        report.weak_pcp_failures += weak_pcp_trial(&mut rng)?;
        report.weak_pcp_fields += 1;
    }
    Ok(())
}
