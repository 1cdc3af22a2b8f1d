//! The `pedcoal` command line: a TOML config overlaid by flags, one subcommand
//! per experiment, CSV outputs plus a `manifest.json` sidecar.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{param, Error, Result};
use crate::genstats::{
    annealed_ttotals, branch_spectrum, kingman_sfs, pedigree_ttotals, sfs_distance, variance_decomposition,
    write_sfs_csv, write_ttotal_csv, write_vardecomp_csv, BranchSpectrum, DeltaModel, SfsAccumulator, SfsRecord,
    EventTimes, delta_spectrum, delta_locus_stream,
};
use crate::limit::{
    empirical_path, run_flow, run_intensity, run_naive, sample_psi, BetaFold, CoalescentRun, PathSource, PsiPath,
    RunSpec, XiIntensity,
};
use crate::paintbox::Paintbox;
use crate::partitions::{set_partitions, GroupedPartition, Partition};
use crate::pedigree::{c_n, CanningsModel, FitnessLaw, OffspringMatrix, Pedigree, TwoSexInner};
use crate::quenched::{run_loci, RunOptions};
use crate::rng::{stream, Purpose};
use crate::stats::{ks_two_sample, ks_two_sample_critical, MeanVar};

#[derive(Parser, Debug)]
#[command(name = "pedcoal", version, about = "Gene genealogies in fixed diploid pedigrees")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Sample a Cannings pedigree and estimate c_N.
    Pedigree,
    /// Trace loci through one pedigree.
    Quenched,
    /// Run the limiting coalescent for a catalog intensity or an imported path.
    Limit,
    /// Compare the ε-naive chain with the limit on one pedigree.
    Naive,
    /// Pedigree-wise SFS of the δ-model.
    Sfs,
    /// Within/between pedigree variance of T_total for the δ-model.
    Vardecomp,
    /// Quick consistency checks.
    Selftest,
}

/// Flags; each overrides the config file entry of the same name.
#[derive(clap::Args, Debug, Default, Clone)]
pub struct Flags {
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the flags, plus an optional `[cannings]` table.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub loci: Option<u64>,
    #[arg(long, global = true)]
    pub pedigrees: Option<u64>,
    /// One value or a comma-separated grid.
    #[arg(long, global = true, value_delimiter = ',')]
    pub psi: Option<Vec<f64>>,
    /// One value or a comma-separated grid; `inf` is the pure large-family limit.
    #[arg(long, global = true, value_delimiter = ',')]
    pub lambda: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Sample size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Population size.
    #[arg(long = "bigN", global = true)]
    pub big_n: Option<usize>,
    #[arg(long, global = true)]
    pub model: Option<String>,
    /// Replicates (c_N draws, limit runs, naive runs, annealed draws).
    #[arg(long, global = true)]
    pub reps: Option<u64>,
    #[arg(long, global = true)]
    pub generations: Option<u64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    /// PsiPath text file for `limit`.
    #[arg(long, global = true)]
    pub import: Option<PathBuf>,
    #[arg(long = "c-pair", global = true)]
    pub c_pair: Option<f64>,
    /// Build the SFS from infinite-sites mutations at this rate instead of branch lengths.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
}

/// Resolved configuration. `threads` and `out` are left out of the digest.
#[derive(Serialize, Deserialize, Debug, Default, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(skip_serializing)]
    pub threads: Option<usize>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    pub loci: Option<u64>,
    pub pedigrees: Option<u64>,
    pub psi: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub n: Option<usize>,
    #[serde(alias = "bigN")]
    pub big_n: Option<usize>,
    pub model: Option<String>,
    pub reps: Option<u64>,
    pub generations: Option<u64>,
    pub horizon: Option<f64>,
    pub import: Option<PathBuf>,
    pub c_pair: Option<f64>,
    pub theta: Option<f64>,
    pub cannings: Option<CanningsModel>,
}

macro_rules! overlay {
    ($cfg:ident, $flags:ident, $($f:ident),*) => {
        $( if $flags.$f.is_some() { $cfg.$f = $flags.$f.clone(); } )*
    };
}

impl RunConfig {
    /// Config file (if any) with the flags on top.
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(p) => toml::from_str(&fs::read_to_string(p)?)?,
            None => RunConfig::default(),
        };
        overlay!(
            cfg, flags, seed, threads, out, loci, pedigrees, psi, lambda, gamma, alpha, eps, n, big_n, model, reps,
            generations, horizon, import, c_pair, theta
        );
        if flags.model.is_some() {
            cfg.cannings = None;
        }
        Ok(cfg)
    }

    fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Parameter("--seed is required".into()))
    }

    fn psi1(&self, default: f64) -> Result<f64> {
        match self.psi.as_deref() {
            None => Ok(default),
            Some([p]) => Ok(*p),
            Some(_) => Err(Error::Parameter("this subcommand takes a single --psi".into())),
        }
    }

    fn psi_grid(&self, default: &[f64]) -> Vec<f64> {
        self.psi.clone().unwrap_or_else(|| default.to_vec())
    }

    fn lambda_grid(&self, default: &[f64]) -> Vec<f64> {
        self.lambda.clone().unwrap_or_else(|| default.to_vec())
    }

    /// The Cannings model: the `[cannings]` table, else `--model` with `--bigN`, `--psi`, `--gamma`.
    pub fn cannings(&self, default: &str) -> Result<CanningsModel> {
        let model = match &self.cannings {
            Some(m) => m.clone(),
            None => {
                let n = self.big_n.unwrap_or(100);
                let psi = self.psi1(1.0)?;
                let gamma = self.gamma.unwrap_or(1.0);
                match self.model.as_deref().unwrap_or(default) {
                    "wf" | "wright_fisher" => CanningsModel::WrightFisher { n },
                    "random_fitness" => CanningsModel::RandomFitness { n, fitness: FitnessLaw::Gamma { shape: self.alpha.unwrap_or(1.0) } },
                    "large_family_couple" => CanningsModel::LargeFamilyCouple { n, psi, gamma },
                    "large_family_individual" => CanningsModel::LargeFamilyIndividual { n, psi, gamma },
                    "two_sex" => CanningsModel::TwoSex { n, r: 0.5, inner: TwoSexInner::WrightFisher },
                    other => {
                        return Err(Error::Parameter(format!(
                            "unknown model `{other}`; use wf, random_fitness, large_family_couple, large_family_individual, two_sex, or a [cannings] table"
                        )))
                    }
                }
            }
        };
        model.validate()?;
        Ok(model)
    }

    /// The limit intensity for `--model`.
    pub fn intensity(&self) -> Result<XiIntensity> {
        let psi = self.psi1(1.0)?;
        let gamma = self.gamma.unwrap_or(1.0);
        match self.model.as_deref().unwrap_or("kingman") {
            "kingman" => Ok(XiIntensity::Kingman),
            "large_family_couple" => XiIntensity::large_family_couple(psi, gamma),
            "large_family_individual" => XiIntensity::large_family_individual(psi, gamma),
            "two_sex_star" => {
                let lambda = match self.lambda.as_deref() {
                    None => 2.0,
                    Some([l]) => *l,
                    Some(_) => return Err(Error::Parameter("two_sex_star takes a single --lambda".into())),
                };
                XiIntensity::two_sex_star(0.5, lambda, psi)
            }
            "beta" => XiIntensity::truncated_beta(self.alpha.unwrap_or(1.5), self.eps, BetaFold::Two),
            "beta4" => XiIntensity::truncated_beta(self.alpha.unwrap_or(1.5), self.eps, BetaFold::Four),
            other => Err(Error::Parameter(format!(
                "unknown intensity `{other}`; use kingman, large_family_couple, large_family_individual, two_sex_star, beta, beta4"
            ))),
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn digest(&self, command: Command) -> String {
        let text = serde_json::to_string(&json!({ "command": command, "config": self })).expect("config serializes");
        Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Errors map to exit code 2 when they come from the configuration.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) | Error::Input(_) | Error::Toml(_) | Error::Partition(_) | Error::Paintbox(_) => 2,
        _ => 1,
    }
}

/// Output of a subcommand: files written and a summary.
#[derive(Debug)]
pub struct Outcome {
    pub files: Vec<String>,
    pub results: Value,
    pub passed: bool,
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Out { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }
}

/// Run a subcommand and write `manifest.json`.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Out::new(&dir)?;
    let results = match command {
        Command::Pedigree => cmd_pedigree(cfg, &mut out)?,
        Command::Quenched => cmd_quenched(cfg, &mut out)?,
        Command::Limit => cmd_limit(cfg, &mut out)?,
        Command::Naive => cmd_naive(cfg, &mut out)?,
        Command::Sfs => cmd_sfs(cfg, &mut out)?,
        Command::Vardecomp => cmd_vardecomp(cfg, &mut out)?,
        Command::Selftest => selftest(cfg.seed.unwrap_or(1))?,
    };
    let passed = results.get("passed").and_then(Value::as_bool).unwrap_or(true);
    let manifest = json!({
        "tool": "pedcoal",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": cfg,
        "config_digest": cfg.digest(command),
        "files": out.files,
        "results": results,
    });
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    w.flush()?;
    Ok(Outcome { files: out.files, results, passed })
}

fn mean_se(m: &MeanVar) -> Value {
    json!({ "mean": m.mean(), "se": m.se(), "count": m.count() })
}

fn cmd_pedigree(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let seed = cfg.seed()?;
    let model = cfg.cannings("wf")?;
    let generations = cfg.generations.unwrap_or(10);
    let reps = cfg.reps.unwrap_or(100_000);
    let ped = Pedigree::new(model.clone(), seed)?;
    let slices: Vec<(OffspringMatrix, _)> = (0..generations).into_par_iter().map(|g| (ped.matrix(g), ped.slice(g))).collect();
    let mut w = csv::Writer::from_writer(out.create("pedigree.csv")?);
    w.write_record(["generation", "individual", "parent0", "parent1"])?;
    for (g, (_, s)) in slices.iter().enumerate() {
        for c in 0..s.n() {
            w.write_record([g.to_string(), (c + 1).to_string(), (s.p0[c] + 1).to_string(), (s.p1[c] + 1).to_string()])?;
        }
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(out.create("offspring.csv")?);
    w.write_record(["generation", "i", "j", "v"])?;
    for (g, (v, _)) in slices.iter().enumerate() {
        for &(i, j, x) in v.entries() {
            w.write_record([g.to_string(), (i + 1).to_string(), (j + 1).to_string(), x.to_string()])?;
        }
    }
    w.flush()?;
    let mc = crate::pedigree::pair_coalescence_prob(&model, reps, seed);
    let used = c_n(&model, reps, seed);
    Ok(json!({
        "model": model,
        "generations": generations,
        "c_n": used.value,
        "c_n_exact": mc.exact,
        "c_n_mc": { "value": mc.value, "se": mc.se, "reps": mc.reps },
    }))
}

fn sample_xi0(n: usize) -> GroupedPartition {
    GroupedPartition::from(Partition::singletons(n))
}

fn cmd_quenched(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let seed = cfg.seed()?;
    let model = cfg.cannings("wf")?;
    let n = cfg.n.unwrap_or(10);
    let loci = cfg.loci.unwrap_or(100);
    let cn = c_n(&model, cfg.reps.unwrap_or(100_000), seed);
    let ped = Pedigree::new(model.clone(), seed)?;
    let mut opts = RunOptions::to_mrca(cn.value);
    if let Some(g) = cfg.generations {
        opts.horizon = g;
    }
    let xi0 = sample_xi0(n);
    if n > ped.n() {
        return Err(Error::Parameter(format!("sample size {n} exceeds population size {}", ped.n())));
    }
    let chunks: Vec<u64> = (0..loci.div_ceil(64)).collect();
    let runs: Vec<_> = chunks
        .par_iter()
        .map(|&c| run_loci(&ped, &xi0, c * 64..((c + 1) * 64).min(loci), &opts, seed))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut w = out.create("trees.txt")?;
    for (l, r) in runs.iter().enumerate() {
        writeln!(w, "# locus {l}")?;
        r.tree.write_text(&mut w)?;
    }
    w.flush()?;
    if let Some(t) = cfg.theta {
        if !(t > 0.0 && t.is_finite()) {
            return param(format!("theta must be positive, got {t}"));
        }
    }
    let spectra: Vec<BranchSpectrum> = runs.iter().map(|r| branch_spectrum(&r.tree)).collect();
    let censored = spectra.iter().filter(|s| s.censored).count();
    let ids: Vec<(Option<f64>, &str, u64, f64)> =
        spectra.iter().enumerate().filter(|(_, s)| !s.censored).map(|(l, s)| (None, "0", l as u64, s.t_total)).collect();
    write_ttotal_csv(out.create("ttotal.csv")?, ids)?;
    let mut acc = SfsAccumulator::new(n);
    for (l, s) in spectra.iter().enumerate() {
        match cfg.theta {
            Some(t) => acc.push(&s.mutate(t, &mut stream(seed, Purpose::Mutation, ped.seed(), l as u64))),
            None => acc.push(s),
        }
    }
    let sfs = acc.estimate().ok();
    if let Some(sfs) = &sfs {
        write_sfs_csv(out.create("sfs.csv")?, &[SfsRecord { psi: None, lambda: None, pedigree_id: "0".into(), sfs: sfs.clone() }])?;
    }
    let mrca: MeanVar = runs.iter().filter_map(|r| r.tree.mrca_time()).collect();
    let pair: MeanVar = runs.iter().filter_map(|r| r.tree.pair_generation(0, 1.min(n - 1)).map(|g| g as f64 * cn.value)).collect();
    Ok(json!({
        "model": model,
        "c_n": cn.value,
        "pedigree_seed": ped.seed(),
        "loci": loci,
        "censored": censored,
        "sfs_source": sfs_source(cfg.theta),
        "mrca_time": mean_se(&mrca),
        "pair_time": mean_se(&pair),
        "sfs": sfs.map(|s| s.proportions),
    }))
}

fn sfs_source(theta: Option<f64>) -> Value {
    match theta {
        Some(t) => json!({ "mutations": { "theta": t } }),
        None => json!("branch_lengths"),
    }
}

fn write_runs(out: &mut Out, runs: &[CoalescentRun]) -> Result<()> {
    let mut w = out.create("events.txt")?;
    for (k, r) in runs.iter().enumerate() {
        writeln!(w, "# run {k}")?;
        r.write_text(&mut w)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(out.create("runs.csv")?);
    w.write_record(["run", "mrca_time", "pair_time", "T_total", "censored"])?;
    for (k, r) in runs.iter().enumerate() {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        let s = branch_spectrum(r);
        w.write_record([k.to_string(), opt(r.mrca_time()), opt(r.pair_time(0, 1.min(r.n() - 1))), s.t_total.to_string(), r.censored.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn run_summary(runs: &[CoalescentRun]) -> Value {
    let mrca: MeanVar = runs.iter().filter_map(CoalescentRun::mrca_time).collect();
    let pair: MeanVar = runs.iter().filter_map(|r| r.pair_time(0, 1.min(r.n() - 1))).collect();
    json!({
        "runs": runs.len(),
        "censored": runs.iter().filter(|r| r.censored).count(),
        "mrca_time": mean_se(&mrca),
        "pair_time": mean_se(&pair),
    })
}

fn cmd_limit(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let seed = cfg.seed()?;
    let n = cfg.n.unwrap_or(10);
    let reps = cfg.reps.unwrap_or(10_000);
    let xi0 = Partition::singletons(n);
    let spec = RunSpec { horizon: cfg.horizon, sample_times: Vec::new() };
    let rng = |k: u64| stream(seed, Purpose::Coalescent, k, 0);
    if let Some(path) = &cfg.import {
        let c = cfg.c_pair.ok_or_else(|| Error::Parameter("an imported path needs --c-pair".into()))?;
        let psi = PsiPath::read_text(BufReader::new(File::open(path)?))?;
        psi.write_text(out.create("psi_path.txt")?)?;
        let runs: Vec<CoalescentRun> = (0..reps)
            .into_par_iter()
            .map(|k| run_flow(&mut PathSource::new(&psi), Some(psi.horizon()), c, &xi0, &spec, &mut rng(k)))
            .collect();
        write_runs(out, &runs)?;
        return Ok(json!({ "source": psi.descriptor(), "atoms": psi.len(), "c_pair": c, "summary": run_summary(&runs) }));
    }
    let intensity = cfg.intensity()?;
    let runs: Vec<CoalescentRun> = match cfg.horizon {
        // one fixed path, every run on it
        Some(h) => {
            let psi = sample_psi(&intensity, h, stream(seed, Purpose::Psi, 0, 0))?;
            psi.write_text(out.create("psi_path.txt")?)?;
            (0..reps)
                .into_par_iter()
                .map(|k| run_flow(&mut PathSource::new(&psi), Some(h), intensity.c_pair(), &xi0, &spec, &mut rng(k)))
                .collect()
        }
        None => (0..reps).into_par_iter().map(|k| run_intensity(&intensity, &xi0, &spec, &mut rng(k))).collect::<Result<_>>()?,
    };
    write_runs(out, &runs)?;
    let total_pair_rate = intensity.atom_pair_rate().map(|r| r + intensity.c_pair());
    Ok(json!({
        "intensity": intensity.to_string(),
        "c_pair": intensity.c_pair(),
        "atom_rate": intensity.atom_rate(),
        "atom_pair_rate": intensity.atom_pair_rate(),
        "total_pair_rate": total_pair_rate,
        "summary": run_summary(&runs),
    }))
}

fn cmd_naive(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let seed = cfg.seed()?;
    let mut cfg = cfg.clone();
    if cfg.big_n.is_none() {
        cfg.big_n = Some(2000);
    }
    let model = cfg.cannings("large_family_couple")?;
    let n = cfg.n.unwrap_or(2);
    let reps = cfg.reps.unwrap_or(10_000);
    let eps = cfg.eps.unwrap_or(0.1);
    let c_pair = match (cfg.c_pair, XiIntensity::for_model(&model)) {
        (Some(c), _) => c,
        (None, Some(i)) => i?.c_pair(),
        (None, None) => return Err(Error::Parameter(format!("{} has no catalog limit; give --c-pair", model.name()))),
    };
    let cn = c_n(&model, cfg.reps.unwrap_or(100_000), seed).value;
    let generations = cfg.generations.unwrap_or_else(|| crate::quenched::default_horizon(cn));
    let ped = Pedigree::new(model.clone(), seed)?;
    let path = empirical_path(&ped, cn, generations, Some(eps))?;
    path.write_text(out.create("psi_path.txt")?)?;
    let xi0 = Partition::singletons(n);
    let spec = RunSpec::default();
    let pairs: Vec<(Option<f64>, Option<f64>)> = (0..reps)
        .into_par_iter()
        .map(|k| {
            let a = run_naive(&path, cn, c_pair, &xi0, generations, &spec, &mut stream(seed, Purpose::Coalescent, k, 0))?;
            let b = run_flow(&mut PathSource::new(&path), Some(path.horizon()), c_pair, &xi0, &spec, &mut stream(seed, Purpose::Coalescent, k, 1));
            Ok((a.pair_time(0, 1), b.pair_time(0, 1)))
        })
        .collect::<Result<_>>()?;
    let mut w = csv::Writer::from_writer(out.create("naive.csv")?);
    w.write_record(["run", "naive_pair_time", "limit_pair_time"])?;
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
    for (k, (a, b)) in pairs.iter().enumerate() {
        w.write_record([k.to_string(), opt(*a), opt(*b)])?;
    }
    w.flush()?;
    let a: Vec<f64> = pairs.iter().filter_map(|p| p.0).collect();
    let b: Vec<f64> = pairs.iter().filter_map(|p| p.1).collect();
    let (ks, crit) = if a.is_empty() || b.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (ks_two_sample(&a, &b), ks_two_sample_critical(a.len(), b.len(), 1e-3))
    };
    Ok(json!({
        "model": model,
        "c_n": cn,
        "c_pair": c_pair,
        "eps": eps,
        "atoms": path.len(),
        "ks": ks,
        "ks_critical_0.001": crit,
        "naive_pair_time": mean_se(&a.iter().copied().collect()),
        "limit_pair_time": mean_se(&b.iter().copied().collect()),
    }))
}

/// SFS of every pedigree `0..pedigrees` and the pooled SFS.
/// With `theta`, spectra count infinite-sites mutations instead of branch lengths.
pub fn delta_sfs(
    model: &DeltaModel,
    n: usize,
    pedigrees: u64,
    loci: u64,
    theta: Option<f64>,
    seed: u64,
) -> Result<(Vec<SfsAccumulator>, SfsAccumulator)> {
    if let Some(t) = theta {
        if !(t > 0.0 && t.is_finite()) {
            return param(format!("theta must be positive, got {t}"));
        }
    }
    let per: Vec<SfsAccumulator> = (0..pedigrees)
        .into_par_iter()
        .map(|p| {
            let mut acc = SfsAccumulator::new(n);
            let mut events = EventTimes::new(seed, p, model.event_rate());
            for l in 0..loci {
                let s = delta_spectrum(model, &mut events, n, &mut delta_locus_stream(seed, p, l));
                match theta {
                    Some(t) => acc.push(&s.mutate(t, &mut stream(seed, Purpose::Mutation, p, l))),
                    None => acc.push(&s),
                }
            }
            acc
        })
        .collect();
    let mut pooled = SfsAccumulator::new(n);
    per.iter().for_each(|a| pooled.merge(a));
    Ok((per, pooled))
}

/// Largest pairwise total variation distance among spectra.
pub fn max_pairwise_tv(spectra: &[Vec<f64>]) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..spectra.len() {
        for j in i + 1..spectra.len() {
            m = m.max(sfs_distance(&spectra[i], &spectra[j]));
        }
    }
    m
}

fn cmd_sfs(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let seed = cfg.seed()?;
    let n = cfg.n.unwrap_or(100);
    let pedigrees = cfg.pedigrees.unwrap_or(5);
    let loci = cfg.loci.unwrap_or(10_000);
    let mut records = Vec::new();
    let mut summary = Vec::new();
    for lambda in cfg.lambda_grid(&[1e6, 1.0]) {
        for psi in cfg.psi_grid(&[0.1, 0.5, 0.9]) {
            let model = DeltaModel::with_lambda(psi, lambda)?;
            let (per, pooled) = delta_sfs(&model, n, pedigrees, loci, cfg.theta, seed)?;
            let pooled = pooled.estimate()?;
            let spectra: Vec<Vec<f64>> = per.iter().map(|a| a.estimate().map(|s| s.proportions)).collect::<Result<_>>()?;
            let to_pooled = spectra.iter().map(|s| sfs_distance(s, &pooled.proportions)).fold(0.0, f64::max);
            summary.push(json!({
                "psi": psi,
                "lambda": lambda,
                "max_pairwise_tv": max_pairwise_tv(&spectra),
                "max_tv_to_pooled": to_pooled,
                "tv_pooled_to_kingman": sfs_distance(&pooled.proportions, &kingman_sfs(n)),
            }));
            for (p, a) in per.iter().enumerate() {
                records.push(SfsRecord { psi: Some(psi), lambda: Some(lambda), pedigree_id: p.to_string(), sfs: a.estimate()? });
            }
            records.push(SfsRecord { psi: Some(psi), lambda: Some(lambda), pedigree_id: "pooled".into(), sfs: pooled });
        }
    }
    write_sfs_csv(out.create("sfs.csv")?, &records)?;
    Ok(json!({ "n": n, "pedigrees": pedigrees, "loci": loci, "sfs_source": sfs_source(cfg.theta), "spectra": summary }))
}

fn cmd_vardecomp(cfg: &RunConfig, out: &mut Out) -> Result<Value> {
    let seed = cfg.seed()?;
    let n = cfg.n.unwrap_or(100);
    let pedigrees = cfg.pedigrees.unwrap_or(100);
    let loci = cfg.loci.unwrap_or(200);
    let reps = cfg.reps.unwrap_or((pedigrees * loci / 10).max(1000));
    let lambda = match cfg.lambda.as_deref() {
        None => 1e6,
        Some([l]) => *l,
        Some(_) => return Err(Error::Parameter("vardecomp takes a single --lambda".into())),
    };
    let shown = pedigrees.min(5);
    let mut rows = Vec::new();
    let mut overlays = Vec::new();
    let mut ttotal: Vec<(Option<f64>, String, u64, f64)> = Vec::new();
    for psi in cfg.psi_grid(&[0.1, 0.25, 0.5, 0.75, 1.0]) {
        let model = DeltaModel::with_lambda(psi, lambda)?;
        let d = variance_decomposition(&model, n, pedigrees, loci, reps, seed)?;
        let fixed: Vec<Vec<f64>> = (0..shown).into_par_iter().map(|p| pedigree_ttotals(&model, n, seed, p, loci)).collect();
        let annealed = annealed_ttotals(&model, n, seed, reps.min(loci));
        let ratio = fixed.iter().map(|t| d.total / t.iter().copied().collect::<MeanVar>().var()).fold(f64::INFINITY, f64::min);
        overlays.push(json!({ "psi": psi, "min_variance_ratio_annealed_to_fixed": ratio }));
        for (p, ts) in fixed.iter().enumerate() {
            ttotal.extend(ts.iter().enumerate().map(|(l, &t)| (Some(psi), p.to_string(), l as u64, t)));
        }
        ttotal.extend(annealed.iter().enumerate().map(|(l, &t)| (Some(psi), "annealed".to_string(), l as u64, t)));
        rows.push(d);
    }
    write_vardecomp_csv(out.create("vardecomp.csv")?, &rows)?;
    write_ttotal_csv(out.create("ttotal.csv")?, ttotal.iter().map(|(a, b, c, d)| (*a, b.as_str(), *c, *d)))?;
    let fractions: Vec<f64> = rows.iter().map(|d| d.between_fraction()).collect();
    Ok(json!({
        "n": n,
        "lambda": lambda,
        "decompositions": rows,
        "between_fractions": fractions,
        "overlays": overlays,
    }))
}

struct Checks {
    lines: Vec<Value>,
    ok: bool,
}

impl Checks {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.ok &= pass;
        self.lines.push(json!({ "check": name, "passed": pass, "detail": detail }));
    }
}

/// Quick versions of the main consistency checks.
pub fn selftest(seed: u64) -> Result<Value> {
    let mut c = Checks { lines: Vec::new(), ok: true };

    let wf = CanningsModel::WrightFisher { n: 100 };
    let est = crate::pedigree::pair_coalescence_prob(&wf, 100_000, seed);
    c.check("wf_c_n", (est.value - 0.005).abs() < 3.0 * est.se, format!("{:.6} ± {:.6} vs 0.005", est.value, est.se));

    let mut rng = stream(seed, Purpose::Misc, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let k = rng.random_range(1..5);
        let mut w: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
        let s: f64 = w.iter().sum::<f64>() / rng.random_range(0.2..1.0);
        w.iter_mut().for_each(|x| *x /= s);
        let pb = Paintbox::new(w)?;
        for b in 1..=5 {
            let xi = Partition::singletons(b);
            let total: f64 = set_partitions(b).iter().map(|eta| pb.prob(&xi, eta)).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    c.check("paintbox_normalization", worst < 1e-10, format!("max |sum - 1| = {worst:.2e}"));

    let v = OffspringMatrix::from_entries(4, [(0, 1, 2), (2, 3, 1), (0, 3, 1)])?;
    let xi = Partition::singletons(2);
    let pair = crate::quenched::oracle::transition_prob(&v, &xi, &Partition::one_block(2));
    let expect = num_rational::Ratio::new(v.totals().iter().map(|&t| (t * t.saturating_sub(1)) as i128).sum::<i128>(), 8 * 4 * 3);
    c.check("oracle_pair", pair == expect, format!("{pair} vs {expect}"));

    let lf = XiIntensity::large_family_couple(1.0, 1.0)?;
    let total = lf.atom_pair_rate().unwrap_or(f64::NAN) + lf.c_pair();
    c.check("rate_identity", (total - 1.0).abs() < 1e-12 && (lf.c_pair() - 2.0 / 3.0).abs() < 1e-12, format!("total pair rate {total}"));

    let m: MeanVar = (0..20_000u64)
        .into_par_iter()
        .map(|k| run_intensity(&XiIntensity::Kingman, &Partition::singletons(3), &RunSpec::default(), &mut stream(seed, Purpose::Coalescent, k, 0)))
        .collect::<Result<Vec<_>>>()?
        .iter()
        .filter_map(CoalescentRun::mrca_time)
        .collect();
    c.check("kingman_mrca", (m.mean() - 4.0 / 3.0).abs() < 3.0 * m.se(), format!("{:.4} ± {:.4} vs 4/3", m.mean(), m.se()));

    let dm = DeltaModel::with_lambda(1.0, f64::INFINITY)?;
    c.check("delta_pair_merge", (dm.effective_prob(2) - 0.125).abs() < 1e-15, format!("{}", dm.effective_prob(2)));

    Ok(json!({ "passed": c.ok, "checks": c.lines }))
}

/// Entry point for the binary; returns the exit code.
pub fn main_with(cli: Cli) -> i32 {
    let cfg = match RunConfig::resolve(&cli.flags) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match run(cli.command, &cfg) {
        Ok(o) if !o.passed => 3,
        Ok(o) => {
            for f in &o.files {
                eprintln!("wrote {f}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
