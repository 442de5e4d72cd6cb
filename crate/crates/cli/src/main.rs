use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use serde_json::json;

use hsvar::analysis::{self, FitReport, DEFAULT_SCREEN_THRESHOLD};
use hsvar::data_io::{self, SeriesTable};
use hsvar::diagnostics;
use hsvar::hmc::{self, SamplerConfig};
use hsvar::phase_binning;
use hsvar::shrinkage::{self, ErrorPrecision};
use hsvar::synth::{self, TruthSpec};
use hsvar::{CirculantPrecision, DrawTable, Model, ModelConfig, ModelData};

#[derive(Parser)]
#[command(name = "hsvar", version, about = "Sparse Bayesian VAR(1) for seasonal count series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group OTUs into phase bins and write scaled log counts per bin.
    Cluster {
        #[arg(long)]
        otu: PathBuf,
        #[arg(long)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
        /// Optional taxonomy table joined onto the assignment sidecar.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Monte Carlo summary of the shrinkage-factor prior for one predictor.
    ShrinkageSim {
        #[arg(long, default_value_t = 12)]
        k: usize,
        #[arg(long)]
        tau: f64,
        #[arg(long, default_value_t = 257)]
        n: usize,
        /// Circulant precision parameters; omit both for a scaled identity.
        #[arg(long, requires = "varpi1")]
        varpi0: Option<f64>,
        #[arg(long, requires = "varpi0")]
        varpi1: Option<f64>,
        /// Error standard deviation when no circulant precision is given.
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1.0)]
        s2: f64,
        #[arg(long, default_value_t = 10_000)]
        draws: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the model by HMC.
    Fit {
        #[arg(long)]
        bins: PathBuf,
        #[arg(long)]
        covariates: Option<PathBuf>,
        /// Apply square-root standardisation to the covariates first.
        #[arg(long)]
        transform_covariates: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 10_000)]
        iter: usize,
        #[arg(long, default_value_t = 3_000)]
        warmup: usize,
        #[arg(long, default_value_t = 7)]
        thin: usize,
        #[arg(long, default_value_t = 0.8)]
        target_accept: f64,
        #[arg(long, default_value_t = 64)]
        max_leapfrog: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a truth specification.
    Simulate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Selection tables, stationarity audit and error correlations of a fit.
    Summarize {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Defaults to the fit directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank candidate covariates against residuals of an intercept-only fit.
    Screen {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        bins: PathBuf,
        #[arg(long)]
        covariates: PathBuf,
        #[arg(long)]
        transform_covariates: bool,
        #[arg(long, default_value_t = DEFAULT_SCREEN_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute R-hat and bulk ESS for every parameter of a fit.
    Diagnose {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn load_covariates(path: &Path, transform: bool) -> Result<SeriesTable> {
    let raw = data_io::load_table(path)?;
    if !transform {
        return Ok(raw);
    }
    Ok(data_io::transform_covariates(&raw)?.0)
}

fn load_config(path: Option<&Path>) -> Result<ModelConfig> {
    match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(ModelConfig::from_json(&text)?)
        }
        None => Ok(ModelConfig::default()),
    }
}

fn sidecar(out: &Path, name: &str) -> PathBuf {
    out.parent().map_or_else(|| PathBuf::from(name), |d| d.join(name))
}

fn cluster(otu: &Path, k: usize, out: &Path, taxonomy: Option<&Path>) -> Result<()> {
    let counts = data_io::load_counts(otu)?;
    let (binned, profiles) = phase_binning::cluster(&counts, k)?;
    data_io::write_counts(&binned.y, out)?;

    let taxa = taxonomy.map(data_io::load_taxonomy).transpose()?;
    let path = sidecar(out, "assignment.csv");
    let mut w = csv::Writer::from_path(&path)?;
    let mut header = vec!["otu_id", "bin", "phase", "amplitude"];
    if taxa.is_some() {
        header.extend(["kingdom", "phylum", "class", "order", "family", "genus"]);
    }
    w.write_record(&header)?;
    for p in &profiles {
        let mut rec = vec![
            p.otu_id.clone(),
            binned.bin_of[&p.otu_id].to_string(),
            p.phase.to_string(),
            p.amplitude.to_string(),
        ];
        if let Some(t) = &taxa {
            let ranks = t.get(&p.otu_id);
            let field = |f: fn(&data_io::TaxonomyRanks) -> &Option<String>| {
                ranks.and_then(|r| f(r).clone()).unwrap_or_default()
            };
            rec.extend([
                field(|r| &r.kingdom),
                field(|r| &r.phylum),
                field(|r| &r.class),
                field(|r| &r.order),
                field(|r| &r.family),
                field(|r| &r.genus),
            ]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_json(&sidecar(out, "scaling.json"), &binned.scaling_info())?;
    info!("{} OTUs into {k} bins over {} weeks", profiles.len(), binned.y.nrows());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn shrinkage_sim(
    k: usize,
    tau: f64,
    n: usize,
    varpi: Option<(f64, f64)>,
    sigma: f64,
    s2: f64,
    draws: usize,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    let precision = match varpi {
        Some((v0, v1)) => ErrorPrecision::Circulant(CirculantPrecision::build(v0, v1, k)?),
        None => ErrorPrecision::Diagonal {
            precision: 1.0 / (sigma * sigma),
            q: k,
        },
    };
    let summary = shrinkage::simulate_shrinkage_prior(&precision, tau, n, s2, draws, seed)?;
    let mut value = serde_json::to_value(&summary)?;
    if varpi.is_none() {
        // Closed form is available for a scaled-identity error covariance.
        value["m_eff_expected"] = json!(shrinkage::expected_m_eff_diagonal(k, 1, n, tau, sigma));
    }
    emit(out, &value)
}

struct FitArgs {
    bins: PathBuf,
    covariates: Option<PathBuf>,
    transform_covariates: bool,
    config: Option<PathBuf>,
    sampler: SamplerConfig,
    out: PathBuf,
}

fn fit(args: FitArgs) -> Result<()> {
    let bins = data_io::load_table(&args.bins)?;
    let covariates = args
        .covariates
        .as_deref()
        .map(|p| load_covariates(p, args.transform_covariates))
        .transpose()?;
    let config = load_config(args.config.as_deref())?;
    let data = ModelData::new(&bins, covariates.as_ref())?;
    let meta = json!({
        "bins": args.bins,
        "covariates": args.covariates,
        "transform_covariates": args.transform_covariates,
        "bin_names": data.bin_names,
        "covariate_names": data.covariate_names,
        "row_offset": data.row_offset,
        "rows": data.n(),
        "config": config,
    });
    let model = Model::new(config, data)?;
    info!(
        "fitting K = {}, L = {}, N = {} ({} parameters)",
        model.data().k(),
        model.data().l(),
        model.data().n(),
        model.dim()
    );
    let draws = hmc::sample_model(&model, &args.sampler)?;
    let table = DrawTable::from_model(&model, &draws)?;

    fs::create_dir_all(&args.out)?;
    table.save(args.out.join("draws.csv"))?;
    let post_warmup = args.sampler.chains * (args.sampler.iterations - args.sampler.warmup);
    let report = diagnostics::diagnose(&table, Some(draws.divergences()), Some(post_warmup))?;
    write_json(&args.out.join("summary.json"), &report)?;
    write_json(&args.out.join("sampler.json"), &draws.sampler_report(&args.sampler))?;
    write_json(&args.out.join("fit.json"), &meta)?;
    info!(
        "max R-hat {:.4}, min bulk ESS {:.0}, {} divergences",
        report.max_rhat,
        report.min_ess_bulk,
        draws.divergences()
    );
    if !report.flagged.is_empty() {
        log::warn!("{} parameters have R-hat above {}", report.flagged.len(), diagnostics::RHAT_THRESHOLD);
    }
    Ok(())
}

fn simulate(spec_path: &Path, out: &Path) -> Result<()> {
    let spec: TruthSpec = read_json(spec_path)?;
    let data = synth::simulate_var(&spec)?;
    fs::create_dir_all(out)?;
    data_io::write_counts(&data.y, out.join("bins.csv"))?;
    data_io::write_counts(&data.covariates, out.join("covariates.csv"))?;
    write_json(&out.join("truth.json"), &data.truth)?;
    Ok(())
}

fn names_from_meta(meta: &serde_json::Value, key: &str) -> Vec<String> {
    meta[key]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default()
}

fn summarize(fit_dir: &Path, level: f64, out: Option<&Path>) -> Result<()> {
    let table = DrawTable::load(fit_dir.join("draws.csv"))?;
    let meta: serde_json::Value = read_json(&fit_dir.join("fit.json")).unwrap_or(json!({}));
    let report = FitReport::build(
        &table,
        level,
        names_from_meta(&meta, "bin_names"),
        names_from_meta(&meta, "covariate_names"),
    )?;
    let out = out.unwrap_or(fit_dir);
    fs::create_dir_all(out)?;
    write_json(&out.join("report.json"), &report)?;
    fs::write(out.join("report.md"), report.to_markdown())?;
    info!("{} coefficients selected", report.selected.len());
    Ok(())
}

fn screen(
    fit_dir: &Path,
    bins: &Path,
    covariates: &Path,
    transform: bool,
    threshold: f64,
    out: Option<&Path>,
) -> Result<()> {
    let table = DrawTable::load(fit_dir.join("draws.csv"))?;
    let meta: serde_json::Value = read_json(&fit_dir.join("fit.json")).unwrap_or(json!({}));
    if meta["covariate_names"].as_array().is_some_and(|a| !a.is_empty()) {
        bail!("screening expects residuals from a fit without covariates");
    }
    let period = meta["config"]["period"].as_f64().unwrap_or(ModelConfig::default().period);
    let y = data_io::load_table(bins)?;
    let data = ModelData::new(&y, None)?;
    let residuals = analysis::residual_means(&table, &data, period)?;
    let cov = load_covariates(covariates, transform)?
        .align_to(y.timestamps())?
        .skip_rows(data.row_offset)?;
    let ranked = analysis::screen_covariates(&residuals, &cov, threshold)?;
    emit(out, &ranked)
}

fn diagnose(fit_dir: &Path, out: Option<&Path>) -> Result<()> {
    let table = DrawTable::load(fit_dir.join("draws.csv"))?;
    let sampler: Option<serde_json::Value> = read_json(&fit_dir.join("sampler.json")).ok();
    let (divergences, post_warmup) = match &sampler {
        Some(s) => {
            let div = s["chains"]
                .as_array()
                .map(|c| c.iter().filter_map(|c| c["divergences"].as_u64()).sum::<u64>() as usize);
            let cfg = &s["config"];
            let post = match (cfg["chains"].as_u64(), cfg["iterations"].as_u64(), cfg["warmup"].as_u64()) {
                (Some(c), Some(i), Some(w)) => Some((c * (i - w)) as usize),
                _ => None,
            };
            (div, post)
        }
        None => (None, None),
    };
    let report = diagnostics::diagnose(&table, divergences, post_warmup)?;
    println!("{:<24} {:>10} {:>10} {:>8} {:>9}", "parameter", "mean", "sd", "rhat", "ess_bulk");
    for p in &report.parameters {
        println!(
            "{:<24} {:>10.4} {:>10.4} {:>8.4} {:>9.0}{}",
            p.name,
            p.mean,
            p.sd,
            p.rhat,
            p.ess_bulk,
            if p.flagged() { "  *" } else { "" }
        );
    }
    if let Some(p) = out {
        write_json(p, &report)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Cluster { otu, bins, out, taxonomy } => cluster(&otu, bins, &out, taxonomy.as_deref()),
        Command::ShrinkageSim {
            k,
            tau,
            n,
            varpi0,
            varpi1,
            sigma,
            s2,
            draws,
            seed,
            out,
        } => shrinkage_sim(k, tau, n, varpi0.zip(varpi1), sigma, s2, draws, seed, out.as_deref()),
        Command::Fit {
            bins,
            covariates,
            transform_covariates,
            config,
            chains,
            iter,
            warmup,
            thin,
            target_accept,
            max_leapfrog,
            seed,
            out,
        } => fit(FitArgs {
            bins,
            covariates,
            transform_covariates,
            config,
            sampler: SamplerConfig {
                chains,
                iterations: iter,
                warmup,
                thin,
                target_accept,
                max_leapfrog_steps: max_leapfrog,
                seed,
                ..SamplerConfig::default()
            },
            out,
        }),
        Command::Simulate { spec, out } => simulate(&spec, &out),
        Command::Summarize { fit, level, out } => summarize(&fit, level, out.as_deref()),
        Command::Screen {
            fit,
            bins,
            covariates,
            transform_covariates,
            threshold,
            out,
        } => screen(&fit, &bins, &covariates, transform_covariates, threshold, out.as_deref()),
        Command::Diagnose { fit, out } => diagnose(&fit, out.as_deref()),
    }
}
