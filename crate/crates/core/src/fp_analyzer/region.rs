use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mechanisms::Family;
use crate::numeric::{bisect, log_grid};

/// Relative distance kept from every finite boundary when picking a parameter.
pub const DEFAULT_MARGIN: f64 = 0.02;
const GRID_POINTS: usize = 2000;
const BOUNDARY_TOL: f64 = 1e-9;

/// How a constraint function compares with zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// g(x) < 0
    Less,
    /// g(x) <= 0
    LessEq,
}

type ConstraintFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One labeled inequality `g(params) < 0` or `g(params) <= 0`.
#[derive(Clone)]
pub struct Constraint {
    pub label: String,
    pub text: String,
    pub relation: Relation,
    g: ConstraintFn,
}

impl Constraint {
    pub fn new<F>(label: &str, text: impl Into<String>, relation: Relation, g: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            text: text.into(),
            relation,
            g: Arc::new(g),
        }
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        (self.g)(params)
    }

    pub fn holds(&self, params: &[f64]) -> bool {
        let v = self.value(params);
        match self.relation {
            Relation::Less => v < 0.0,
            Relation::LessEq => v <= 0.0,
        }
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.text)
    }
}

/// An interval of the free parameter with explicit endpoint inclusion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "crate::serde_ext")]
    pub lo: f64,
    #[serde(with = "crate::serde_ext")]
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        (x > self.lo || (self.lo_closed && x == self.lo))
            && (x < self.hi || (self.hi_closed && x == self.hi))
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && !(self.lo_closed && self.hi_closed))
    }

    fn intersect(&self, o: &Interval) -> Interval {
        let (lo, lo_closed) = if self.lo > o.lo {
            (self.lo, self.lo_closed)
        } else if o.lo > self.lo {
            (o.lo, o.lo_closed)
        } else {
            (self.lo, self.lo_closed && o.lo_closed)
        };
        let (hi, hi_closed) = if self.hi < o.hi {
            (self.hi, self.hi_closed)
        } else if o.hi < self.hi {
            (o.hi, o.hi_closed)
        } else {
            (self.hi, self.hi_closed && o.hi_closed)
        };
        Interval {
            lo,
            hi,
            lo_closed,
            hi_closed,
        }
    }

    /// The sub-interval at least `margin` (relative to the boundary value, or to
    /// the width when that is larger) away from each finite endpoint.
    fn shrunk(&self, margin: f64) -> Option<(f64, f64)> {
        let pad = |b: f64| margin * b.abs().max(1e-12);
        let lo = if self.lo.is_finite() {
            self.lo + pad(self.lo)
        } else {
            self.lo
        };
        let hi = if self.hi.is_finite() {
            self.hi - pad(self.hi)
        } else {
            self.hi
        };
        (lo < hi).then_some((lo, hi))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}, {}{}",
            if self.lo_closed { '[' } else { '(' },
            crate::serde_ext::fmt(self.lo),
            crate::serde_ext::fmt(self.hi),
            if self.hi_closed { ']' } else { ')' },
        )
    }
}

/// Search domain of the free parameter.
#[derive(Clone, Copy, Debug)]
pub struct Domain {
    pub lo: f64,
    pub hi: f64,
    /// Whether the parameter may grow past `hi`; a set that reaches `hi` is
    /// then reported as unbounded.
    pub open_above: bool,
}

/// A parameter region: labeled inequalities over a parameter vector, with one
/// free coordinate solved into intervals and the others fixed.
#[derive(Clone, Debug)]
pub struct ParamRegion {
    pub family: Family,
    pub names: Vec<&'static str>,
    /// Values of the fixed coordinates; the free one is ignored.
    pub base: Vec<f64>,
    pub free: usize,
    pub constraints: Vec<Constraint>,
    /// Per-constraint solution sets, in constraint order.
    pub solved: Vec<Vec<Interval>>,
    /// Intersection of all solution sets.
    pub intervals: Vec<Interval>,
}

impl ParamRegion {
    /// Solves every constraint along the free coordinate over `domain` and
    /// intersects the results.
    pub fn solve(
        family: Family,
        names: Vec<&'static str>,
        base: Vec<f64>,
        free: usize,
        domain: Domain,
        constraints: Vec<Constraint>,
    ) -> Result<Self> {
        if free >= base.len() || names.len() != base.len() {
            return Err(invalid("free coordinate out of range"));
        }
        if !(domain.lo < domain.hi) {
            return Err(invalid("empty search domain"));
        }
        let grid = domain_grid(domain);
        let mut solved = Vec::with_capacity(constraints.len());
        for c in &constraints {
            solved.push(solve_one(c, &base, free, &grid, domain)?);
        }
        let mut intervals = vec![Interval {
            lo: domain.lo,
            hi: if domain.open_above {
                f64::INFINITY
            } else {
                domain.hi
            },
            lo_closed: false,
            hi_closed: !domain.open_above,
        }];
        for set in &solved {
            let mut next = Vec::new();
            for a in &intervals {
                for b in set {
                    let i = a.intersect(b);
                    if !i.is_empty() {
                        next.push(i);
                    }
                }
            }
            intervals = next;
        }
        Ok(Self {
            family,
            names,
            base,
            free,
            constraints,
            solved,
            intervals,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn free_name(&self) -> &'static str {
        self.names[self.free]
    }

    /// The full parameter vector with the free coordinate set to `x`.
    pub fn point(&self, x: f64) -> Vec<f64> {
        let mut p = self.base.clone();
        p[self.free] = x;
        p
    }

    /// Whether every labeled inequality holds at `params`.
    pub fn contains(&self, params: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.holds(params))
    }

    /// Labels of the inequalities that fail at `params`.
    pub fn violated(&self, params: &[f64]) -> Vec<String> {
        self.constraints
            .iter()
            .filter(|c| !c.holds(params))
            .map(|c| c.label.clone())
            .collect()
    }

    /// A deterministic interior parameter at least `margin` inside every
    /// boundary: the midpoint of the widest shrunk interval, or 1.5 times the
    /// lower end (plus one for a zero lower end) when unbounded above.
    pub fn pick(&self, margin: f64) -> Result<Vec<f64>> {
        let mut best: Option<(f64, f64)> = None;
        for iv in &self.intervals {
            if let Some((lo, hi)) = iv.shrunk(margin) {
                let x = if hi.is_finite() {
                    0.5 * (lo + hi)
                } else if iv.lo > 0.0 {
                    (1.5 * iv.lo).max(lo)
                } else {
                    lo.max(0.0) + 1.0
                };
                let w = hi - lo;
                if best.is_none_or(|b| w > b.1) {
                    best = Some((x, w));
                }
            }
        }
        let (x, _) = best.ok_or_else(|| {
            Error::NoSolution(format!(
                "region over {} is empty or too thin",
                self.free_name()
            ))
        })?;
        self.checked(x)
    }

    /// A uniform draw from the shrunk region; unbounded intervals are cut at
    /// twice their lower end plus one.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> Result<Vec<f64>> {
        let pieces: Vec<(f64, f64)> = self
            .intervals
            .iter()
            .filter_map(|iv| iv.shrunk(margin))
            .map(|(lo, hi)| {
                if hi.is_finite() {
                    (lo, hi)
                } else {
                    (lo, 2.0 * lo.abs() + 1.0)
                }
            })
            .filter(|(lo, hi)| lo < hi)
            .collect();
        let total: f64 = pieces.iter().map(|(lo, hi)| hi - lo).sum();
        if pieces.is_empty() || !(total > 0.0) {
            return Err(Error::NoSolution(format!(
                "region over {} is empty or too thin",
                self.free_name()
            )));
        }
        let mut u = rng.random::<f64>() * total;
        for (lo, hi) in &pieces {
            if u <= hi - lo {
                return self.checked(lo + u);
            }
            u -= hi - lo;
        }
        let (lo, hi) = pieces[pieces.len() - 1];
        self.checked(0.5 * (lo + hi))
    }

    fn checked(&self, x: f64) -> Result<Vec<f64>> {
        let p = self.point(x);
        let bad = self.violated(&p);
        if bad.is_empty() {
            Ok(p)
        } else {
            Err(Error::NoSolution(format!(
                "picked {} = {x} violates {}",
                self.free_name(),
                bad.join(", ")
            )))
        }
    }

    /// Boundary table: one row per solved interval of each constraint, then the
    /// intersection rows labeled `region`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&REGION_CSV_HEADER[1..])?;
        for row in self.csv_rows() {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Boundary rows: one per interval of each constraint's solution set, then
    /// one per interval of the intersection, labelled `region`.
    fn csv_rows(&self) -> Vec<[String; 8]> {
        self.constraints
            .iter()
            .zip(&self.solved)
            .flat_map(|(c, set)| {
                set.iter()
                    .map(move |iv| (c.label.as_str(), c.text.as_str(), iv))
            })
            .chain(self.intervals.iter().map(|iv| ("region", "", iv)))
            .map(|(label, text, iv)| {
                [
                    self.family.name().to_string(),
                    self.free_name().to_string(),
                    label.to_string(),
                    text.to_string(),
                    crate::serde_ext::fmt(iv.lo),
                    crate::serde_ext::fmt(iv.hi),
                    iv.lo_closed.to_string(),
                    iv.hi_closed.to_string(),
                ]
            })
            .collect()
    }
}

pub const REGION_CSV_HEADER: [&str; 9] = [
    "solver",
    "family",
    "parameter",
    "constraint",
    "condition",
    "lo",
    "hi",
    "lo_closed",
    "hi_closed",
];

/// Several labelled regions in one boundary table.
pub fn write_regions_csv<W: Write>(regions: &[(String, ParamRegion)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(REGION_CSV_HEADER)?;
    for (solver, r) in regions {
        for row in r.csv_rows() {
            w.write_record(std::iter::once(solver.as_str()).chain(row.iter().map(String::as_str)))?;
        }
    }
    w.flush()?;
    Ok(())
}

impl fmt::Display for ParamRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{} in {{}}", self.free_name());
        }
        let parts: Vec<String> = self.intervals.iter().map(|i| i.to_string()).collect();
        write!(f, "{} in {}", self.free_name(), parts.join(" u "))
    }
}

fn domain_grid(d: Domain) -> Vec<f64> {
    if d.lo > 0.0 {
        log_grid(d.lo, d.hi, GRID_POINTS)
    } else {
        (0..GRID_POINTS)
            .map(|i| d.lo + (d.hi - d.lo) * i as f64 / (GRID_POINTS - 1) as f64)
            .collect()
    }
}

/// Solution set of one constraint along the free coordinate: sign changes on
/// the grid refined by bisection.
fn solve_one(
    c: &Constraint,
    base: &[f64],
    free: usize,
    grid: &[f64],
    d: Domain,
) -> Result<Vec<Interval>> {
    let g = |x: f64| {
        let mut p = base.to_vec();
        p[free] = x;
        c.value(&p)
    };
    let sat = |v: f64| match c.relation {
        Relation::Less => v < 0.0,
        Relation::LessEq => v <= 0.0,
    };
    let closed = c.relation == Relation::LessEq;
    let vals: Vec<f64> = grid.iter().map(|&x| g(x)).collect();
    let mut out = Vec::new();
    let mut start: Option<(f64, bool)> = if sat(vals[0]) {
        Some((d.lo, false))
    } else {
        None
    };
    for i in 1..grid.len() {
        let (a, b) = (sat(vals[i - 1]), sat(vals[i]));
        if a == b {
            continue;
        }
        let x = crossing(&g, grid[i - 1], grid[i], vals[i - 1], vals[i])?;
        if b {
            start = Some((x, closed));
        } else if let Some((lo, lo_closed)) = start.take() {
            out.push(Interval {
                lo,
                hi: x,
                lo_closed,
                hi_closed: closed,
            });
        }
    }
    if let Some((lo, lo_closed)) = start {
        out.push(Interval {
            lo,
            hi: if d.open_above { f64::INFINITY } else { d.hi },
            lo_closed,
            hi_closed: !d.open_above,
        });
    }
    Ok(out)
}

fn crossing<G: Fn(f64) -> f64>(g: &G, a: f64, b: f64, ga: f64, gb: f64) -> Result<f64> {
    if ga.is_finite() && gb.is_finite() {
        bisect(g, a, b, BOUNDARY_TOL * (1.0 + a.abs()))
    } else {
        // Infinite values (log of zero) still carry a usable sign.
        let s = ga <= 0.0;
        crate::numeric::switch_point(|x| (g(x) <= 0.0) == s, a, b, BOUNDARY_TOL * (1.0 + a.abs()))
    }
}
