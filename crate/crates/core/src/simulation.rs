//! Seeded perturbation experiment on synthetic banded similarity matrices.
//!
//! A base matrix with a strong diagonal band is generated once. For every
//! perturbation level and replicate, a fraction of its upper-triangle entries
//! are swapped at random, the result is shifted into a kernel, and HAC and
//! order-constrained HAC are run and compared.
//!
//! Every (level, replicate) pair draws from its own SplitMix64 stream, so
//! results do not depend on scheduling and reruns are bit-identical.

use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analysis::{bakers_gamma, broken_stick_select, cut_by_count, nmi};
use crate::engine::{hac, ochac, MergeTree};
use crate::heights::{all_heights, cophenetic_matrix, HeightKind};
use crate::io::format_float;
use crate::proximity::{kernel_to_dissimilarity, similarity_to_kernel, LambdaStrategy, SimilarityMatrix};
use crate::rng::{sub_seed, SplitMix64};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationConfig {
    pub n: usize,
    pub levels: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    /// Band half-width `w`: entries with `|i - j| > w` carry noise only.
    pub band_width: usize,
    /// Decay rate `rho` of `exp(-rho |i - j|)` inside the band.
    pub decay: f64,
    /// Amplitude `sigma` of the uniform noise added everywhere.
    pub noise: f64,
    pub lambda_strategy: LambdaStrategy,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            n: 200,
            levels: vec![0.0, 0.15, 0.30, 0.60, 0.90],
            replicates: 20,
            seed: 20_240_501,
            band_width: 20,
            decay: 0.1,
            noise: 0.05,
            lambda_strategy: LambdaStrategy::ExactEigen,
        }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if self.levels.is_empty() {
            return bad("at least one perturbation level is needed".into());
        }
        if let Some(l) = self.levels.iter().find(|l| !(0.0..1.0).contains(*l)) {
            return bad(format!("perturbation level {l} outside [0, 1)"));
        }
        check_generator(self.n, self.band_width, self.decay, self.noise)
    }

    /// Reads `key = value` lines; unknown keys are rejected, missing keys keep their defaults.
    ///
    /// Keys: `n`, `levels` (comma separated), `replicates`, `seed`, `band_width`,
    /// `decay`, `noise`, `lambda_strategy`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = PerturbationConfig::default();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Input(format!("config line {}: expected key = value", line_no + 1)))?;
            let invalid = || Error::Input(format!("config line {}: bad value {value:?} for {key}", line_no + 1));
            fn num<T: FromStr>(v: &str, e: impl Fn() -> Error) -> Result<T> {
                v.parse().map_err(|_| e())
            }
            match key {
                "n" => cfg.n = num(value, invalid)?,
                "replicates" => cfg.replicates = num(value, invalid)?,
                "seed" => cfg.seed = num(value, invalid)?,
                "band_width" => cfg.band_width = num(value, invalid)?,
                "decay" => cfg.decay = num(value, invalid)?,
                "noise" => cfg.noise = num(value, invalid)?,
                "lambda_strategy" => cfg.lambda_strategy = value.parse()?,
                "levels" => {
                    cfg.levels = value.split(',').map(|v| num(v.trim(), invalid)).collect::<Result<_>>()?;
                }
                _ => return Err(Error::Input(format!("config line {}: unknown key {key:?}", line_no + 1))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_generator(n: usize, w: usize, rho: f64, sigma: f64) -> Result<()> {
    if n < 2 || w < 1 || !(rho > 0.0) || !(sigma >= 0.0) || !rho.is_finite() || !sigma.is_finite() {
        return Err(Error::Parameter(format!(
            "generator needs n >= 2, w >= 1, rho > 0, sigma >= 0 (got n={n}, w={w}, rho={rho}, sigma={sigma})"
        )));
    }
    Ok(())
}

/// `s_ij = exp(-rho |i-j|) 1{|i-j| <= w} + sigma u_ij`, with the diagonal set to the row maximum plus one.
pub fn generate_banded_similarity(n: usize, w: usize, rho: f64, sigma: f64, seed: u64) -> Result<SimilarityMatrix> {
    check_generator(n, w, rho, sigma)?;
    let mut rng = SplitMix64::new(seed);
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let gap = j - i;
            let band = if gap <= w { (-rho * gap as f64).exp() } else { 0.0 };
            let s = band + sigma * rng.next_f64();
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    for i in 0..n {
        let row_max = (0..n).filter(|&j| j != i).map(|j| values[i * n + j]).fold(f64::NEG_INFINITY, f64::max);
        values[i * n + i] = row_max + 1.0;
    }
    SimilarityMatrix::new(n, values)
}

/// Performs `ceil(level * n(n+1)/2)` swaps of two upper-triangle entries (diagonal included).
///
/// Each swap draws two cells uniformly, with replacement across draws, and is
/// redrawn while the two entries sum to a non-positive value. The perturbed
/// diagonal need not stay positive; the later diagonal shift absorbs this.
pub fn perturb(s: &SimilarityMatrix, level: f64, seed: u64) -> Result<SimilarityMatrix> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Parameter(format!("perturbation level {level} outside [0, 1)")));
    }
    let n = s.n();
    let cells: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let draws = (level * cells.len() as f64).ceil() as usize;
    let mut values = s.values().to_vec();
    if !values.iter().any(|&v| v > 0.0) {
        return Err(Error::Input("no pair of entries has a positive sum".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let total = cells.len() as u64;
    for _ in 0..draws {
        let (a, b) = loop {
            let a = cells[rng.below(total) as usize];
            let b = cells[rng.below(total) as usize];
            if values[a.0 * n + a.1] + values[b.0 * n + b.1] > 0.0 {
                break (a, b);
            }
        };
        let (va, vb) = (values[a.0 * n + a.1], values[b.0 * n + b.1]);
        for ((i, j), v) in [(a, vb), (b, va)] {
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    Ok(SimilarityMatrix::from_symmetric_unchecked(n, values))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Hac,
    Ochac,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Hac, Method::Ochac];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hac => "hac",
            Method::Ochac => "ochac",
        }
    }
}

/// Per-method outcome of one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRun {
    pub m: Vec<f64>,
    pub ess: Vec<f64>,
    /// Reversal flag per step, one vector per [`HeightKind::ALL`] entry.
    pub reversals: [Vec<bool>; 4],
    /// Size of the cluster created at each step.
    pub cardinals: Vec<usize>,
    pub broken_stick_k: usize,
    /// Some unshifted linkage was negative and was clamped for the broken-stick rule.
    pub clamped: bool,
}

impl MethodRun {
    /// `lambda` is the diagonal shift behind `d`; it is removed from the
    /// linkages before the broken-stick rule, which would otherwise see a
    /// constant offset on every share.
    fn new(tree: &MergeTree, d: &crate::proximity::DissimilarityMatrix, lambda: f64) -> Result<Self> {
        let seqs = all_heights(tree, d)?;
        let reversals = seqs.clone().map(|s| {
            let mut flags = vec![false; s.values.len()];
            for t in s.reversal_steps {
                flags[t - 1] = true;
            }
            flags
        });
        let raw: Vec<f64> = seqs[0].values.iter().map(|m| m - lambda).collect();
        let choice = broken_stick_select(&raw)?;
        let [m, ess, _, _] = seqs;
        Ok(MethodRun {
            m: m.values,
            ess: ess.values,
            reversals,
            cardinals: tree.mergers().iter().map(|x| x.size).collect(),
            broken_stick_k: choice.k,
            clamped: choice.clamped,
        })
    }

    pub fn reversal_count(&self, kind: HeightKind) -> usize {
        self.reversals[kind_index(kind)].iter().filter(|&&r| r).count()
    }

    pub fn has_negative_linkage(&self) -> bool {
        self.m.iter().any(|&x| x < 0.0)
    }

    /// Error sum of squares of the `k`-cluster partition (`0` for singletons).
    pub fn ess_at(&self, k: usize) -> f64 {
        let n = self.m.len() + 1;
        if k >= n {
            0.0
        } else {
            self.ess[n - k - 1]
        }
    }
}

fn kind_index(kind: HeightKind) -> usize {
    HeightKind::ALL.iter().position(|&k| k == kind).expect("listed kind")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateResult {
    pub level_index: usize,
    pub level: f64,
    pub replicate: usize,
    pub lambda: f64,
    /// Pseudo-inertia of the whole set, the final `ESS`.
    pub total_inertia: f64,
    pub hac: MethodRun,
    pub ochac: MethodRun,
    /// Baker's gamma between the two trees, cophenetic heights from `m_t`.
    pub bakers_gamma: f64,
    /// NMI between the broken-stick partitions of the two methods.
    pub nmi: f64,
}

impl ReplicateResult {
    pub fn run(&self, method: Method) -> &MethodRun {
        match method {
            Method::Hac => &self.hac,
            Method::Ochac => &self.ochac,
        }
    }

    /// Largest linkage over both methods, used to normalize `m_t`.
    pub fn max_linkage(&self) -> f64 {
        self.hac.m.iter().chain(&self.ochac.m).fold(f64::NEG_INFINITY, |a, &b| a.max(b))
    }
}

const GENERATOR_STREAM: u64 = u64::MAX;

/// One (level, replicate) cell of the experiment.
pub fn run_replicate(
    cfg: &PerturbationConfig,
    base: &SimilarityMatrix,
    level_index: usize,
    replicate: usize,
) -> Result<ReplicateResult> {
    let level = cfg.levels[level_index];
    let seed = sub_seed(cfg.seed, &[level_index as u64, replicate as u64]);
    let s = perturb(base, level, seed)?;
    let (kernel, lambda) = similarity_to_kernel(&s, cfg.lambda_strategy)?;
    let d = kernel_to_dissimilarity(&kernel)?;
    let trees = [hac(&d)?, ochac(&d)?];
    let [hac_run, ochac_run] = [MethodRun::new(&trees[0], &d, lambda)?, MethodRun::new(&trees[1], &d, lambda)?];
    let c = trees.each_ref().map(|t| cophenetic_matrix(t, &t.linkages()));
    let bakers_gamma = bakers_gamma(&c[0], &c[1])?;
    let nmi = nmi(
        &cut_by_count(&trees[0], hac_run.broken_stick_k)?,
        &cut_by_count(&trees[1], ochac_run.broken_stick_k)?,
    )?;
    let n = d.n();
    let total_inertia = d.condensed().iter().map(|x| x * x).sum::<f64>() / n as f64;
    Ok(ReplicateResult {
        level_index,
        level,
        replicate,
        lambda,
        total_inertia,
        hac: hac_run,
        ochac: ochac_run,
        bakers_gamma,
        nmi,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: PerturbationConfig,
    /// Ordered by level index, then replicate.
    pub results: Vec<ReplicateResult>,
}

/// Runs every (level, replicate) cell on the current rayon pool.
pub fn run_experiment(cfg: &PerturbationConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let base = generate_banded_similarity(
        cfg.n,
        cfg.band_width,
        cfg.decay,
        cfg.noise,
        sub_seed(cfg.seed, &[GENERATOR_STREAM]),
    )?;
    let cells: Vec<(usize, usize)> =
        (0..cfg.levels.len()).flat_map(|l| (0..cfg.replicates).map(move |r| (l, r))).collect();
    let results = cells
        .par_iter()
        .map(|&(l, r)| run_replicate(cfg, &base, l, r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentReport { config: cfg.clone(), results })
}

/// Relative slack when comparing two ESS values; at `k = 1` both equal the
/// total inertia up to summation order.
pub const ESS_COMPARE_RTOL: f64 = 1e-9;

/// Means over the replicates of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSummary {
    pub level: f64,
    pub mean_gamma: f64,
    pub mean_nmi: f64,
    /// Mean reversal count per method (`[hac, ochac]`) and height kind.
    pub mean_reversals: [[f64; 4]; 2],
    /// Fraction of replicates where OCHAC's ESS at HAC's broken-stick k is not above HAC's.
    pub ochac_ess_not_worse: f64,
}

impl ExperimentReport {
    pub fn level(&self, level_index: usize) -> impl Iterator<Item = &ReplicateResult> {
        self.results.iter().filter(move |r| r.level_index == level_index)
    }

    pub fn summary(&self, level_index: usize) -> LevelSummary {
        let reps: Vec<_> = self.level(level_index).collect();
        let count = reps.len() as f64;
        let mean = |f: &dyn Fn(&ReplicateResult) -> f64| reps.iter().map(|r| f(r)).sum::<f64>() / count;
        let mut mean_reversals = [[0.0; 4]; 2];
        for (mi, method) in Method::ALL.into_iter().enumerate() {
            for (ki, kind) in HeightKind::ALL.into_iter().enumerate() {
                mean_reversals[mi][ki] = mean(&|r| r.run(method).reversal_count(kind) as f64);
            }
        }
        LevelSummary {
            level: self.config.levels[level_index],
            mean_gamma: mean(&|r| r.bakers_gamma),
            mean_nmi: mean(&|r| r.nmi),
            mean_reversals,
            ochac_ess_not_worse: mean(&|r| {
                let k = r.hac.broken_stick_k;
                let (o, h) = (r.ochac.ess_at(k), r.hac.ess_at(k));
                f64::from(u8::from(o <= h + ESS_COMPARE_RTOL * h.abs()))
            }),
        }
    }

    /// Per-step mean, minimum and maximum of a normalized curve over one level's replicates.
    pub fn envelope(&self, level_index: usize, method: Method, kind: HeightKind) -> Vec<(f64, f64, f64)> {
        let curves: Vec<Vec<f64>> = self.level(level_index).map(|r| normalized(r, method, kind)).collect();
        let steps = curves.first().map_or(0, Vec::len);
        (0..steps)
            .map(|t| {
                let col = curves.iter().map(|c| c[t]);
                let mean = col.clone().sum::<f64>() / curves.len() as f64;
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                (mean, lo, hi)
            })
            .collect()
    }

    /// `level,replicate,step,method,m_norm,ess_norm`
    pub fn heights_csv(&self) -> String {
        let mut out = String::from("level,replicate,step,method,m_norm,ess_norm\n");
        for r in &self.results {
            for method in Method::ALL {
                let m = normalized(r, method, HeightKind::Linkage);
                let ess = normalized(r, method, HeightKind::Ess);
                for (t, (a, b)) in m.iter().zip(&ess).enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        format_float(r.level),
                        r.replicate,
                        t + 1,
                        method.name(),
                        format_float(*a),
                        format_float(*b)
                    );
                }
            }
        }
        out
    }

    /// `level,step,method,height_kind,pct_replicates_reversed`
    pub fn reversals_csv(&self) -> String {
        let mut out = String::from("level,step,method,height_kind,pct_replicates_reversed\n");
        for (li, &level) in self.config.levels.iter().enumerate() {
            let reps: Vec<_> = self.level(li).collect();
            for method in Method::ALL {
                for (ki, kind) in HeightKind::ALL.into_iter().enumerate() {
                    for t in 0..self.config.n - 1 {
                        let hits = reps.iter().filter(|r| r.run(method).reversals[ki][t]).count();
                        let pct = 100.0 * hits as f64 / reps.len() as f64;
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            format_float(level),
                            t + 1,
                            method.name(),
                            kind.name(),
                            format_float(pct)
                        );
                    }
                }
            }
        }
        out
    }

    /// `level,step,method,mean_cardinal`
    pub fn cardinals_csv(&self) -> String {
        let mut out = String::from("level,step,method,mean_cardinal\n");
        for (li, &level) in self.config.levels.iter().enumerate() {
            let reps: Vec<_> = self.level(li).collect();
            for method in Method::ALL {
                for t in 0..self.config.n - 1 {
                    let mean = reps.iter().map(|r| r.run(method).cardinals[t] as f64).sum::<f64>() / reps.len() as f64;
                    let _ =
                        writeln!(out, "{},{},{},{}", format_float(level), t + 1, method.name(), format_float(mean));
                }
            }
        }
        out
    }

    /// One row per replicate with gamma, NMI, selected k, ESS at k and reversal counts.
    pub fn gamma_nmi_csv(&self) -> String {
        let mut out = String::from("level,replicate,lambda,bakers_gamma,nmi");
        for method in Method::ALL {
            let _ = write!(out, ",k_{0},ess_at_k_{0},clamped_{0}", method.name());
            for kind in HeightKind::ALL {
                let _ = write!(out, ",reversals_{}_{}", kind.name(), method.name());
            }
        }
        out.push('\n');
        for r in &self.results {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                format_float(r.level),
                r.replicate,
                format_float(r.lambda),
                format_float(r.bakers_gamma),
                format_float(r.nmi)
            );
            for method in Method::ALL {
                let run = r.run(method);
                let _ = write!(
                    out,
                    ",{},{},{}",
                    run.broken_stick_k,
                    format_float(run.ess_at(run.broken_stick_k)),
                    u8::from(run.clamped)
                );
                for kind in HeightKind::ALL {
                    let _ = write!(out, ",{}", run.reversal_count(kind));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Line chart of the mean normalized curve per level and method, with min/max envelopes.
    pub fn curves_svg(&self, kind: HeightKind) -> String {
        const W: f64 = 640.0;
        const H: f64 = 400.0;
        const PAD: f64 = 40.0;
        let palette = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"];
        let series: Vec<_> = (0..self.config.levels.len())
            .flat_map(|li| Method::ALL.into_iter().map(move |m| (li, m)))
            .map(|(li, m)| (li, m, self.envelope(li, m, kind)))
            .collect();
        let (lo, hi) = series
            .iter()
            .flat_map(|(_, _, e)| e.iter().flat_map(|&(_, a, b)| [a, b]))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
        let span = if hi > lo { hi - lo } else { 1.0 };
        let steps = self.config.n.saturating_sub(1).max(2) as f64;
        let x = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / (steps - 1.0);
        let y = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - lo) / span;
        let mut svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\">\n\
             <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
             <text x=\"{PAD}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">{} (normalized) per step</text>\n",
            kind.name()
        );
        for (li, method, env) in &series {
            let color = palette[li % palette.len()];
            let dash = if *method == Method::Ochac { " stroke-dasharray=\"4 3\"" } else { "" };
            let line = |f: &dyn Fn(&(f64, f64, f64)) -> f64| {
                env.iter().enumerate().map(|(t, e)| format!("{:.2},{:.2}", x(t), y(f(e)))).collect::<Vec<_>>().join(" ")
            };
            for bound in [line(&|e| e.1), line(&|e| e.2)] {
                let _ = writeln!(
                    svg,
                    "<polyline fill=\"none\" stroke=\"{color}\" stroke-opacity=\"0.25\"{dash} points=\"{bound}\"/>"
                );
            }
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"><title>level {} {}</title></polyline>",
                line(&|e| e.0),
                format_float(self.config.levels[*li]),
                method.name()
            );
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn normalized(r: &ReplicateResult, method: Method, kind: HeightKind) -> Vec<f64> {
    let run = r.run(method);
    match kind {
        HeightKind::Ess => run.ess.iter().map(|v| v / r.total_inertia).collect(),
        _ => {
            let scale = r.max_linkage();
            run.m.iter().map(|v| v / scale).collect()
        }
    }
}
