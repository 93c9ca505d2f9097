//! Run configuration: an INI-style file with sections `[cell]`, `[macro]`,
//! `[solver]`, `[physics]` and `[study]`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::expr::{eval_constant, Expr};
use crate::fem::SolveMethod;
use crate::geometry::{AxisBox, MacroDomain, ResonatorCell};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub method: SolveMethod,
    /// Macro mesh size for the effective solve.
    pub mesh_h: f64,
    /// Resolved mesh size inside a cell, in cell coordinates.
    pub h_cell: f64,
    /// Unit-cell mesh size for the cell problems.
    pub cell_h: f64,
    pub pole_guard: f64,
    pub max_triangles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicsConfig {
    pub omega: f64,
    /// Sweep grid in `omega^2`.
    pub omega_sq_grid: Option<Vec<f64>>,
    pub g_expr: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub eps_list: Vec<f64>,
    /// Scale of the single resolved run.
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// `None` for a cell without an obstacle (`block_rect = none`), which
    /// only the cell problem accepts.
    pub cell: Option<ResonatorCell>,
    pub domain: MacroDomain,
    pub solver: SolverConfig,
    pub physics: PhysicsConfig,
    pub study: StudyConfig,
}

const KEYS: &[(&str, &[&str])] = &[
    ("cell", &["r_rect", "block_rect", "y_r", "y_q", "alpha", "p", "dim"]),
    ("macro", &["omega_rect", "d_rect"]),
    (
        "solver",
        &["tolerance", "method", "mesh_h", "h_cell", "cell_h", "pole_guard", "max_triangles"],
    ),
    ("physics", &["omega", "omega_grid", "omega_sq_grid", "g_expr"]),
    ("study", &["eps_list", "eps", "seed"]),
];

type Entries = BTreeMap<(String, String), (usize, String)>;

fn parse_entries(text: &str) -> Result<Entries> {
    let mut out = Entries::new();
    let mut section: Option<&str> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |msg: String| Error::Config { line: line_no, msg };
        let line = raw.split(['#', ';']).next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(format!("malformed section header '{line}'")))?
                .trim();
            let known = KEYS.iter().find(|(s, _)| *s == name);
            section = Some(known.ok_or_else(|| err(format!("unknown section [{name}]")))?.0);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let sec = section.ok_or_else(|| err(format!("key '{key}' outside any section")))?;
        let allowed = KEYS.iter().find(|(s, _)| *s == sec).unwrap().1;
        if !allowed.contains(&key) {
            return Err(err(format!("unknown key '{key}' in [{sec}]")));
        }
        if value.is_empty() {
            return Err(err(format!("empty value for '{key}'")));
        }
        if let Some((prev, _)) = out.insert((sec.to_string(), key.to_string()), (line_no, value.to_string())) {
            return Err(err(format!("duplicate key '{key}' (first set on line {prev})")));
        }
    }
    Ok(out)
}

struct Reader {
    entries: Entries,
}

impl Reader {
    fn get(&self, sec: &str, key: &str) -> Option<(usize, &str)> {
        self.entries
            .get(&(sec.to_string(), key.to_string()))
            .map(|(l, v)| (*l, v.as_str()))
    }

    fn line(&self, sec: &str, key: &str) -> usize {
        self.get(sec, key).map_or(0, |(l, _)| l)
    }

    fn number(&self, sec: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some((line, v)) => eval_constant(v).map_err(|e| Error::Config {
                line,
                msg: format!("{key}: {e}"),
            }),
        }
    }

    fn integer(&self, sec: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(sec, key) {
            None => Ok(default),
            Some((line, v)) => v.parse::<u64>().map_err(|_| Error::Config {
                line,
                msg: format!("{key}: expected a non-negative integer, got '{v}'"),
            }),
        }
    }

    fn list(&self, sec: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((line, v)) = self.get(sec, key) else {
            return Ok(None);
        };
        parse_list(v).map(Some).map_err(|msg| Error::Config {
            line,
            msg: format!("{key}: {msg}"),
        })
    }

    fn rect(&self, sec: &str, key: &str, default: Option<AxisBox>) -> Result<Option<AxisBox>> {
        let Some((line, v)) = self.get(sec, key) else {
            return Ok(default);
        };
        if v.eq_ignore_ascii_case("none") {
            return Ok(None);
        }
        let err = |msg: String| Error::Config {
            line,
            msg: format!("{key}: {msg}"),
        };
        let vals = parse_list(v).map_err(err)?;
        if vals.len() % 2 != 0 || vals.is_empty() || vals.len() > 6 {
            return Err(err(format!(
                "expected lo, hi pairs per axis (4 or 6 numbers), got {}",
                vals.len()
            )));
        }
        let lo: Vec<f64> = vals.iter().step_by(2).copied().collect();
        let hi: Vec<f64> = vals.iter().skip(1).step_by(2).copied().collect();
        AxisBox::new(&lo, &hi).map(Some).map_err(|e| err(e.to_string()))
    }
}

/// Comma-separated constants, or `lo:hi:n` for `n` evenly spaced values.
pub fn parse_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range must be lo:hi:n, got '{v}'"));
        }
        let lo = eval_constant(parts[0]).map_err(|e| e.to_string())?;
        let hi = eval_constant(parts[1]).map_err(|e| e.to_string())?;
        let n: usize = parts[2].trim().parse().map_err(|_| format!("bad count '{}'", parts[2].trim()))?;
        return match n {
            0 => Err("range count must be positive".into()),
            1 => Ok(vec![lo]),
            _ => Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()),
        };
    }
    v.split(',')
        .map(|s| eval_constant(s).map_err(|e| format!("'{}': {e}", s.trim())))
        .collect()
}

fn read_cell(r: &Reader) -> Result<Option<ResonatorCell>> {
    let (ra, ba) = cell_a_default();
    let Some(block_rect) = r.rect("cell", "block_rect", Some(ba))? else {
        if let Some(key) = KEYS[0].1.iter().find(|k| **k != "block_rect" && r.get("cell", k).is_some()) {
            return Err(Error::Config {
                line: r.line("cell", key),
                msg: format!("'{key}' is not allowed with block_rect = none"),
            });
        }
        return Ok(None);
    };
    let r_rect = r.rect("cell", "r_rect", Some(ra))?.ok_or_else(|| Error::Config {
        line: r.line("cell", "r_rect"),
        msg: "r_rect cannot be none".into(),
    })?;
    let dim = r.integer("cell", "dim", 2)? as usize;
    let p = r.integer("cell", "p", if dim == 3 { 1 } else { 2 })?;
    let cell = ResonatorCell::new(
        r_rect,
        block_rect,
        r.number("cell", "y_r", -0.10)?,
        r.number("cell", "y_q", 0.15)?,
        r.number("cell", "alpha", 0.1)?,
        u32::try_from(p).map_err(|_| Error::Config {
            line: r.line("cell", "p"),
            msg: "p too large".into(),
        })?,
        dim,
    )?;
    Ok(Some(cell))
}

fn cell_a_default() -> (AxisBox, AxisBox) {
    (
        AxisBox::rect(-0.40, -0.10, -0.15, 0.15).unwrap(),
        AxisBox::rect(-0.45, 0.15, -0.20, 0.20).unwrap(),
    )
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let r = Reader {
            entries: parse_entries(text)?,
        };
        let cell = read_cell(&r)?;
        let omega_rect = r
            .rect("macro", "omega_rect", Some(AxisBox::rect(0.0, 1.0, 0.0, 1.0).unwrap()))?
            .ok_or_else(|| Error::Config {
                line: r.line("macro", "omega_rect"),
                msg: "omega_rect cannot be none".into(),
            })?;
        let d_rect = r.rect("macro", "d_rect", Some(AxisBox::rect(0.25, 0.75, 0.25, 0.75).unwrap()))?;
        let domain = MacroDomain::new(omega_rect, d_rect)?;

        let method = match r.get("solver", "method") {
            None => SolveMethod::Direct,
            Some((line, v)) => v.parse().map_err(|msg| Error::Config { line, msg })?,
        };
        let positive = |sec: &str, key: &str, v: f64| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config {
                    line: r.line(sec, key),
                    msg: format!("{key} must be positive, got {v}"),
                })
            }
        };
        let solver = SolverConfig {
            tolerance: positive("solver", "tolerance", r.number("solver", "tolerance", 1e-10)?)?,
            method,
            mesh_h: positive("solver", "mesh_h", r.number("solver", "mesh_h", 1.0 / 256.0)?)?,
            h_cell: positive("solver", "h_cell", r.number("solver", "h_cell", 0.04)?)?,
            cell_h: positive("solver", "cell_h", r.number("solver", "cell_h", 0.02)?)?,
            pole_guard: positive("solver", "pole_guard", r.number("solver", "pole_guard", 1e-8)?)?,
            max_triangles: r.integer("solver", "max_triangles", 2_000_000)? as usize,
        };

        let omega = r.number("physics", "omega", 2.0)?;
        if !(omega >= 0.0 && omega.is_finite()) {
            return Err(Error::Config {
                line: r.line("physics", "omega"),
                msg: format!("omega must be finite and non-negative, got {omega}"),
            });
        }
        let omega_sq_grid = match (r.list("physics", "omega_grid")?, r.list("physics", "omega_sq_grid")?) {
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    line: r.line("physics", "omega_sq_grid"),
                    msg: "give either omega_grid or omega_sq_grid, not both".into(),
                })
            }
            (Some(w), None) => Some(w.iter().map(|x| x * x).collect()),
            (None, g) => g,
        };
        let g_expr = match r.get("physics", "g_expr") {
            None => Expr::parse("cos(omega*x1)").unwrap(),
            Some((line, v)) => Expr::parse(v).map_err(|e| Error::Config {
                line,
                msg: format!("g_expr: {e}"),
            })?,
        };
        let physics = PhysicsConfig {
            omega,
            omega_sq_grid,
            g_expr,
        };

        let eps_list = r.list("study", "eps_list")?.unwrap_or_else(|| vec![0.25, 0.125, 0.0625]);
        if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config {
                line: r.line("study", "eps_list"),
                msg: "eps_list must be positive and strictly decreasing".into(),
            });
        }
        let eps = positive("study", "eps", r.number("study", "eps", 0.125)?)?;
        let study = StudyConfig {
            eps_list,
            eps,
            seed: r.integer("study", "seed", 42)?,
        };
        Ok(RunConfig {
            cell,
            domain,
            solver,
            physics,
            study,
        })
    }

    /// The resonator cell, required by every command except `cell`.
    pub fn resonator(&self) -> Result<&ResonatorCell> {
        self.cell.as_ref().ok_or_else(|| {
            Error::Input("this command needs a resonator cell, but block_rect = none".into())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The full configuration with defaults filled in, in the input format.
    pub fn resolved(&self) -> String {
        let rect = |b: &AxisBox| {
            (0..b.dim())
                .map(|d| format!("{:?}, {:?}", b.lo(d), b.hi(d)))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let _ = writeln!(s, "[cell]");
        match &self.cell {
            None => {
                let _ = writeln!(s, "block_rect = none");
            }
            Some(c) => {
                let _ = writeln!(s, "r_rect = {}", rect(&c.r_rect));
                let _ = writeln!(s, "block_rect = {}", rect(&c.block_rect));
                let _ = writeln!(s, "y_r = {:?}", c.y_r);
                let _ = writeln!(s, "y_q = {:?}", c.y_q);
                let _ = writeln!(s, "alpha = {:?}", c.alpha);
                let _ = writeln!(s, "p = {}", c.p);
                let _ = writeln!(s, "dim = {}", c.dim);
            }
        }
        let _ = writeln!(s, "\n[macro]");
        let _ = writeln!(s, "omega_rect = {}", rect(&self.domain.omega_rect));
        let _ = writeln!(s, "d_rect = {}", self.domain.d_rect.as_ref().map_or("none".to_string(), rect));
        let v = &self.solver;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "tolerance = {:?}", v.tolerance);
        let _ = writeln!(s, "method = {}", v.method);
        let _ = writeln!(s, "mesh_h = {:?}", v.mesh_h);
        let _ = writeln!(s, "h_cell = {:?}", v.h_cell);
        let _ = writeln!(s, "cell_h = {:?}", v.cell_h);
        let _ = writeln!(s, "pole_guard = {:?}", v.pole_guard);
        let _ = writeln!(s, "max_triangles = {}", v.max_triangles);
        let ph = &self.physics;
        let _ = writeln!(s, "\n[physics]");
        let _ = writeln!(s, "omega = {:?}", ph.omega);
        if let Some(g) = &ph.omega_sq_grid {
            let _ = writeln!(s, "omega_sq_grid = {}", list(g));
        }
        let _ = writeln!(s, "g_expr = {}", ph.g_expr.source());
        let st = &self.study;
        let _ = writeln!(s, "\n[study]");
        let _ = writeln!(s, "eps_list = {}", list(&st.eps_list));
        let _ = writeln!(s, "eps = {:?}", st.eps);
        let _ = writeln!(s, "seed = {}", st.seed);
        s
    }
}
