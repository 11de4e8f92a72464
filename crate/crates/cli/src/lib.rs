//! Experiment presets producing transport-efficiency tables.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use thiserror::Error;

use qwalk_core::dynamics::{Convergence, PercolationSpec, WalkKind};
use qwalk_core::graph::{
    build_cayley_tree, build_ladder, build_reduced_cayley, NamedInitial, StateGraph,
};
use qwalk_core::numerics::DEFAULT_TOL;
use qwalk_core::transport::{dynamic_efficiency, efficiency_projector, trapped_basis, Method};

pub const CSV_HEADER: &str = "family,parameter,walk,variant,initial,p,method,efficiency";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] qwalk_core::Error),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    /// Ladder: both walks from `psi0` and averaged.
    Fig3,
    /// Cayley tree from `psi1` with reduced trees for the coined walk.
    Fig5,
    /// Averaged percolated efficiency on full and reduced trees.
    Fig6,
    /// Percolated walk on the Cayley tree from `psi1` and `psi2`.
    Fig8,
    Custom,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Ladder,
    Cayley,
}

impl Family {
    pub fn token(self) -> &'static str {
        match self {
            Family::Ladder => "ladder",
            Family::Cayley => "cayley",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Full,
    Reduced1,
    Reduced2,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Full, Variant::Reduced1, Variant::Reduced2];

    pub fn token(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::Reduced1 => "reduced1",
            Variant::Reduced2 => "reduced2",
        }
    }
}

/// Graph selected by family, parameter and variant.
pub fn build_graph(family: Family, parameter: usize, variant: Variant) -> Result<StateGraph> {
    let g = match (family, variant) {
        (Family::Ladder, Variant::Full) => build_ladder(parameter)?,
        (Family::Ladder, _) => {
            return Err(ExperimentError::Config(
                "ladders have no reduced variants".into(),
            ))
        }
        (Family::Cayley, Variant::Full) => build_cayley_tree(parameter, 2)?,
        (Family::Cayley, Variant::Reduced1) => build_reduced_cayley(parameter, 1)?,
        (Family::Cayley, Variant::Reduced2) => build_reduced_cayley(parameter, 2)?,
    };
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Preset,
    /// Used by the custom preset; presets fix their own family.
    pub family: Family,
    pub max_parameter: usize,
    pub p: f64,
    /// Restricts the rows; empty means no restriction (custom: both walks).
    pub walks: Vec<WalkKind>,
    /// Restricts the rows; empty means no restriction (custom: averaged).
    pub initials: Vec<NamedInitial>,
    /// Restricts the rows; empty means no restriction (custom: full).
    pub variants: Vec<Variant>,
    pub methods: Vec<Method>,
    pub tol: f64,
    pub convergence: Convergence,
}

impl ExperimentConfig {
    pub fn new(preset: Preset, family: Family, max_parameter: usize) -> Self {
        ExperimentConfig {
            preset,
            family,
            max_parameter,
            p: 0.5,
            walks: Vec::new(),
            initials: Vec::new(),
            variants: Vec::new(),
            methods: vec![Method::Projector],
            tol: DEFAULT_TOL,
            convergence: Convergence::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_parameter < 1 {
            return Err(ExperimentError::Config(
                "parameter range must include at least 1".into(),
            ));
        }
        PercolationSpec::new(self.p)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(ExperimentError::Config(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.methods.is_empty() || self.methods.contains(&Method::Analytic) {
            return Err(ExperimentError::Config(
                "methods must be projector and/or dynamic".into(),
            ));
        }
        if self.family == Family::Ladder
            && self.preset == Preset::Custom
            && self.variants.iter().any(|&v| v != Variant::Full)
        {
            return Err(ExperimentError::Config(
                "ladders have no reduced variants".into(),
            ));
        }
        Ok(())
    }

    fn family(&self) -> Family {
        match self.preset {
            Preset::Fig3 => Family::Ladder,
            Preset::Fig5 | Preset::Fig6 | Preset::Fig8 => Family::Cayley,
            Preset::Custom => self.family,
        }
    }

    /// `(variant, walk, initial)` combinations evaluated at every parameter.
    fn series(&self) -> Vec<(Variant, WalkKind, NamedInitial)> {
        use NamedInitial::*;
        use Variant::*;
        use WalkKind::*;
        let base: Vec<(Variant, WalkKind, NamedInitial)> = match self.preset {
            Preset::Fig3 => vec![
                (Full, Pcqw, Psi0),
                (Full, Cqw, Psi0),
                (Full, Pcqw, Averaged),
                (Full, Cqw, Averaged),
            ],
            Preset::Fig5 => vec![
                (Full, Pcqw, Psi1),
                (Reduced2, Cqw, Psi1),
                (Reduced1, Cqw, Psi1),
                (Full, Pcqw, Averaged),
            ],
            Preset::Fig6 => vec![
                (Full, Pcqw, Averaged),
                (Reduced1, Pcqw, Averaged),
                (Reduced2, Pcqw, Averaged),
            ],
            Preset::Fig8 => vec![(Full, Pcqw, Psi1), (Full, Pcqw, Psi2)],
            Preset::Custom => {
                let variants = if self.variants.is_empty() {
                    vec![Full]
                } else {
                    self.variants.clone()
                };
                let walks = if self.walks.is_empty() {
                    vec![Pcqw, Cqw]
                } else {
                    self.walks.clone()
                };
                let initials = if self.initials.is_empty() {
                    vec![Averaged]
                } else {
                    self.initials.clone()
                };
                let mut out = Vec::new();
                for &v in &variants {
                    for &w in &walks {
                        for &i in &initials {
                            out.push((v, w, i));
                        }
                    }
                }
                return out;
            }
        };
        base.into_iter()
            .filter(|(v, w, i)| {
                (self.variants.is_empty() || self.variants.contains(v))
                    && (self.walks.is_empty() || self.walks.contains(w))
                    && (self.initials.is_empty() || self.initials.contains(i))
            })
            .collect()
    }
}

/// Identifies one table row; the derived order is the CSV row order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowKey {
    pub family: Family,
    pub parameter: usize,
    pub walk: WalkKind,
    pub variant: Variant,
    pub initial: NamedInitial,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub key: RowKey,
    /// Open probability; `None` for the coined walk.
    pub p: Option<f64>,
    pub efficiency: f64,
}

/// Evaluates every row of the configuration. Rows come back sorted by
/// [`RowKey`], independent of evaluation order.
pub fn run(config: &ExperimentConfig) -> Result<Vec<Row>> {
    config.validate()?;
    let family = config.family();
    let series = config.series();
    if series.is_empty() {
        return Err(ExperimentError::Config("the filters select no rows".into()));
    }
    // One task per graph and walk, so the trapped basis is computed once.
    let mut groups: BTreeMap<(usize, Variant, WalkKind), Vec<NamedInitial>> = BTreeMap::new();
    for parameter in 1..=config.max_parameter {
        for &(v, w, i) in &series {
            let entry = groups.entry((parameter, v, w)).or_default();
            if !entry.contains(&i) {
                entry.push(i);
            }
        }
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let perc = PercolationSpec::new(config.p)?;
    let chunks: Vec<Vec<Row>> = groups
        .par_iter()
        .map(|((parameter, variant, walk), initials)| {
            let g = build_graph(family, *parameter, *variant)?;
            let basis = if config.methods.contains(&Method::Projector) {
                Some(trapped_basis(&g, *walk, config.tol)?)
            } else {
                None
            };
            let p = match walk {
                WalkKind::Pcqw => Some(config.p),
                WalkKind::Cqw => None,
            };
            let mut rows = Vec::new();
            for &initial in initials {
                for &method in &config.methods {
                    let spec = initial.spec();
                    let efficiency = match (method, &basis) {
                        (Method::Projector, Some(b)) => efficiency_projector(b, &g, &spec)?.q,
                        _ => dynamic_efficiency(&g, *walk, &perc, &spec, &config.convergence)?.q,
                    };
                    rows.push(Row {
                        key: RowKey {
                            family,
                            parameter: *parameter,
                            walk: *walk,
                            variant: *variant,
                            initial,
                            method,
                        },
                        p,
                        efficiency,
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let mut rows: Vec<Row> = chunks.into_iter().flatten().collect();
    rows.sort_by_key(|r| r.key);
    Ok(rows)
}

/// Twelve significant digits: fixed notation for `1e-4 <= |x| < 1e6`,
/// scientific otherwise.
pub fn format_value(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.11e}");
    let exponent: i32 = sci
        .rsplit('e')
        .next()
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if (-4..6).contains(&exponent) {
        let decimals = (11 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        sci
    }
}

fn format_p(p: Option<f64>) -> String {
    match p {
        Some(p) => p.to_string(),
        None => "1".into(),
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = &self.key;
        write!(
            f,
            "{},{},{},{},{},{},{},{}",
            k.family.token(),
            k.parameter,
            k.walk.token(),
            k.variant.token(),
            k.initial.token(),
            format_p(self.p),
            k.method.token(),
            format_value(self.efficiency)
        )
    }
}

pub fn to_csv(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{row}");
    }
    out
}

type SeriesKey = (WalkKind, Variant, NamedInitial, Method);

/// Line chart of efficiency against the parameter, one polyline per series.
pub fn to_svg(rows: &[Row]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    const COLORS: [&str; 6] = [
        "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
    ];

    let mut series: BTreeMap<SeriesKey, Vec<(usize, f64)>> = BTreeMap::new();
    for r in rows {
        let k = r.key;
        series
            .entry((k.walk, k.variant, k.initial, k.method))
            .or_default()
            .push((k.parameter, r.efficiency));
    }
    let max_x = rows
        .iter()
        .map(|r| r.key.parameter)
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    let x_of = |p: usize| M + (p as f64 - 1.0) / (max_x - 1.0) * (W - 2.0 * M);
    let y_of = |q: f64| H - M - q.clamp(0.0, 1.0) * (H - 2.0 * M);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<polyline points="{M},{M} {M},{} {},{}" fill="none" stroke="black"/>"#,
        H - M,
        W - M,
        H - M
    );
    for tick in 0..=4 {
        let q = tick as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{:.1}" font-size="10" text-anchor="end">{q:.2}</text>"#,
            M - 5.0,
            y_of(q) + 3.0
        );
    }
    for p in 1..=max_x as usize {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" font-size="10" text-anchor="middle">{p}</text>"#,
            x_of(p),
            H - M + 15.0
        );
    }
    for (i, ((walk, variant, initial, method), points)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let coords: Vec<String> = points
            .iter()
            .map(|&(p, q)| format!("{:.1},{:.1}", x_of(p), y_of(q)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{} {} {} {}</text>"#,
            M + 10.0,
            M + 14.0 * (i as f64 + 1.0),
            walk.token(),
            variant.token(),
            initial.token(),
            method.token()
        );
    }
    s.push_str("</svg>\n");
    s
}

/// JSON description of the selected graph.
pub fn dump_graph(family: Family, parameter: usize, variant: Variant) -> Result<String> {
    Ok(build_graph(family, parameter, variant)?.to_json()?)
}
