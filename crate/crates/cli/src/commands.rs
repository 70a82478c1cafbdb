use std::path::{Path, PathBuf};
use std::time::Instant;

use lexicon_core::distance::{pairwise_distances, DistanceKind, DistanceTable, DtwOptions, ItemSet};
use lexicon_core::evaluate::{evaluate_all, render_table, EvalReport};
use lexicon_core::experiment::{
    cluster_dataset, compare_systems, perfect_init, perfect_representations, prepare, run_system, CompareConfig,
    Dataset, PcaFit, PrepConfig, SystemRun, SystemSpec,
};
use lexicon_core::io::{
    read_clustering, read_features, read_json, read_lxk, read_manifest, read_units, write_clustering, write_features,
    write_json, write_lxk, write_manifest, write_units, Clustering, LxkMatrix, Manifest,
};
use lexicon_core::synth::{generate, sweep_noise, SynthConfig};
use lexicon_core::transform::{
    apply_pca, average_embed, dpdp_smooth, embedding_matrix, fit_pca, normalize_mean_variance, train_codebook,
    Codebook, PcaProjection, WordEmbedding,
};
use lexicon_core::{seed::SeedStream, LexiconError, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::*;
use crate::run::{create_dir, file_in, subdir_or_self, to_value, Context};

pub const CLUSTERING_FILE: &str = "clustering.tsv";
pub const REPORT_FILE: &str = "report.json";
pub const EMBEDDINGS_FILE: &str = "embeddings.lxk";
pub const DISTANCES_FILE: &str = "distances.lxd";

pub fn dispatch(command: Command, ctx: &Context) -> Result<()> {
    match command {
        Command::Transform(c) => transform(c, ctx),
        Command::Distance(DistanceCommand::Pairwise {
            manifest,
            kind,
            input,
            band,
            budget_bytes,
            out,
        }) => distance_pairwise(&manifest, kind, &input, band, budget_bytes, &out.out, ctx),
        Command::Cluster(ClusterCommand::Run(args)) => cluster_run(args, ctx),
        Command::Evaluate(args) => evaluate(args),
        Command::Experiment(c) => experiment(c, ctx),
        Command::Synth(c) => synth(c, ctx),
    }
}

fn load_corpus(corpus: &CorpusArgs) -> Result<(Manifest, Vec<lexicon_core::io::FrameFeatureSequence>)> {
    let manifest = read_manifest(&corpus.manifest)?;
    let features = read_features(subdir_or_self(&corpus.features, "features"), &manifest)?;
    Ok((manifest, features))
}

fn corpus_config(corpus: &CorpusArgs) -> serde_json::Value {
    json!({ "manifest": corpus.manifest, "features": corpus.features })
}

fn transform(command: TransformCommand, ctx: &Context) -> Result<()> {
    match command {
        TransformCommand::Normalize { corpus, out } => {
            let (_, raw) = load_corpus(&corpus)?;
            let start = Instant::now();
            let (seqs, stats) = normalize_mean_variance(&raw)?;
            let elapsed = start.elapsed().as_secs_f64();
            create_dir(&out.out)?;
            write_features(out.out.join("features"), &seqs)?;
            write_json(&stats, out.out.join("norm_stats.json"))?;
            ctx.write_metadata(&out.out, "transform normalize", corpus_config(&corpus), json!({ "normalize_s": elapsed }))
        }
        TransformCommand::Pca {
            corpus,
            dim,
            fit_first,
            projection,
            out,
        } => {
            let (_, seqs) = load_corpus(&corpus)?;
            let start = Instant::now();
            let pca = match &projection {
                Some(path) => PcaProjection::load(path)?,
                None => {
                    let fit_on = match fit_first {
                        Some(n) => &seqs[..n.min(seqs.len())],
                        None => &seqs[..],
                    };
                    fit_pca(fit_on, dim)?
                }
            };
            let projected = seqs.par_iter().map(|s| apply_pca(s, &pca)).collect::<Result<Vec<_>>>()?;
            let elapsed = start.elapsed().as_secs_f64();
            create_dir(&out.out)?;
            write_features(out.out.join("features"), &projected)?;
            pca.save(out.out.join("pca.lxk"))?;
            let mut config = corpus_config(&corpus);
            config["dim"] = json!(pca.output_dim());
            config["fit"] = to_value(&fit_first.map_or(PcaFit::All, PcaFit::First))?;
            config["projection"] = json!(projection);
            ctx.write_metadata(&out.out, "transform pca", config, json!({ "pca_s": elapsed }))
        }
        TransformCommand::Embed { corpus, out } => {
            let (_, seqs) = load_corpus(&corpus)?;
            let embeddings = seqs.par_iter().map(average_embed).collect::<Result<Vec<_>>>()?;
            create_dir(&out.out)?;
            write_lxk(&LxkMatrix::F32(embedding_matrix(&embeddings)?), out.out.join(EMBEDDINGS_FILE))?;
            ctx.write_metadata(&out.out, "transform embed", corpus_config(&corpus), json!({}))
        }
        TransformCommand::Quantize {
            corpus,
            codebook_size,
            codebook,
            lambda,
            seed,
            out,
        } => {
            if !(lambda >= 0.0 && lambda.is_finite()) {
                return Err(LexiconError::Argument(format!("--lambda must be finite and >= 0, got {lambda}")));
            }
            let (_, seqs) = load_corpus(&corpus)?;
            let start = Instant::now();
            let cb = match &codebook {
                Some(path) => Codebook::load(path)?,
                None => train_codebook(&seqs, codebook_size, SeedStream::new(seed).seed_for("codebook"))?,
            };
            let units = seqs
                .par_iter()
                .map(|s| dpdp_smooth(s, &cb, lambda))
                .collect::<Result<Vec<_>>>()?;
            let elapsed = start.elapsed().as_secs_f64();
            create_dir(&out.out)?;
            write_units(out.out.join("units"), &units)?;
            cb.save(out.out.join("codebook.lxk"))?;
            let mut config = corpus_config(&corpus);
            config["codebook_size"] = json!(cb.size());
            config["codebook"] = json!(codebook);
            config["lambda"] = json!(lambda);
            config["seed"] = json!(seed);
            ctx.write_metadata(&out.out, "transform quantize", config, json!({ "quantize_s": elapsed }))
        }
    }
}

fn read_embeddings(path: &Path, manifest: &Manifest) -> Result<Vec<WordEmbedding>> {
    let path = file_in(path, EMBEDDINGS_FILE);
    let LxkMatrix::F32(m) = read_lxk(&path)? else {
        return Err(LexiconError::Validation(format!("{} does not hold f32 embeddings", path.display())));
    };
    if m.nrows() != manifest.len() {
        return Err(LexiconError::DimensionMismatch {
            expected: manifest.len(),
            found: m.nrows(),
            context: format!("embedding rows in {}", path.display()),
        });
    }
    Ok(manifest
        .segment_ids()
        .zip(m.outer_iter())
        .map(|(id, row)| WordEmbedding {
            segment_id: id.to_string(),
            vector: row.to_vec(),
        })
        .collect())
}

fn distance_pairwise(
    manifest: &Path,
    kind: DistanceKind,
    input: &Path,
    band: Option<usize>,
    budget_bytes: usize,
    out: &Path,
    ctx: &Context,
) -> Result<()> {
    let m = read_manifest(manifest)?;
    let items = match kind {
        DistanceKind::Cosine => ItemSet::embeddings(&read_embeddings(input, &m)?)?,
        DistanceKind::Dtw => ItemSet::sequences(&read_features(subdir_or_self(input, "features"), &m)?, DtwOptions { band })?,
        DistanceKind::Edit => ItemSet::units(&read_units(subdir_or_self(input, "units"), &m)?),
    };
    let start = Instant::now();
    let table: DistanceTable = pairwise_distances(&items, budget_bytes)?;
    let elapsed = start.elapsed().as_secs_f64();
    create_dir(out)?;
    table.write(out.join(DISTANCES_FILE))?;
    let config = json!({ "manifest": manifest, "kind": kind, "input": input, "band": band, "budget_bytes": budget_bytes });
    ctx.write_metadata(out, "distance pairwise", config, json!({ "distances_s": elapsed }))
}

/// Report with the runtime dropped, so reruns are byte-identical.
fn deterministic(report: &EvalReport) -> EvalReport {
    EvalReport {
        runtime_s: None,
        ..*report
    }
}

fn write_run(dir: &Path, clustering: &Clustering, report: &EvalReport) -> Result<()> {
    write_clustering(clustering, dir.join(CLUSTERING_FILE))?;
    write_json(&deterministic(report), dir.join(REPORT_FILE))
}

fn print_table(rows: &[(String, EvalReport)]) {
    print!("{}", render_table(rows));
}

fn cluster_run(args: ClusterRunArgs, ctx: &Context) -> Result<()> {
    let spec = SystemSpec::new(args.repr.into(), args.method.into())?;
    let spec = spec.clone().with_hyperparameters(args.hyper.apply(spec.hyperparameters.clone()));
    let manifest = read_manifest(&args.manifest)?;
    let (mut embeddings, mut sequences, mut units) = (Vec::new(), Vec::new(), None);
    match args.repr {
        ReprArg::Avg => embeddings = read_embeddings(&args.input, &manifest)?,
        ReprArg::Dtw => sequences = read_features(subdir_or_self(&args.input, "features"), &manifest)?,
        ReprArg::Edit => units = Some(read_units(subdir_or_self(&args.input, "units"), &manifest)?),
    }
    let data = Dataset {
        manifest,
        sequences,
        embeddings,
        units,
        ned_mode: Default::default(),
    };
    let k = match spec.hyperparameters.k {
        Some(k) => k,
        None => {
            let k = data.true_k().map_err(|_| {
                LexiconError::Argument("--k is required when the manifest has no word labels".into())
            })?;
            log::info!("using the true type count k={k}");
            k
        }
    };
    let run = cluster_dataset(&spec, &data, k)?;
    let clustering = Clustering::for_manifest(&data.manifest, &run.labels)?;
    create_dir(&args.out.out)?;
    write_clustering(&clustering, args.out.out.join(CLUSTERING_FILE))?;
    eprintln!("{} clusters from {} segments in {:.3} s", clustering.n_clusters(), clustering.len(), run.runtime_s);
    let config = json!({
        "manifest": args.manifest,
        "input": args.input,
        "system": spec,
        "k": k,
    });
    let timings = json!({ "runtime_s": run.runtime_s, "gamma_search": run.gamma });
    ctx.write_metadata(&args.out.out, "cluster run", config, timings)
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let clustering = read_clustering(&args.clustering)?;
    let manifest = read_manifest(&args.manifest)?;
    let report = evaluate_all(&clustering, &manifest, args.runtime, args.ned_mode)?;
    if let Some(out) = &args.out {
        write_json(&report, out)?;
    }
    if matches!(args.format, Format::Both | Format::Json) {
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    if args.format == Format::Both {
        println!();
    }
    if matches!(args.format, Format::Both | Format::Table) {
        let name = args.clustering.file_stem().map_or("clustering".into(), |s| s.to_string_lossy().into_owned());
        print_table(&[(name, report)]);
    }
    Ok(())
}

fn resolve_system(system: &SystemArgs) -> SystemSpec {
    let h = system.hyper.apply(system.system.hyperparameters.clone());
    system.system.clone().with_hyperparameters(h)
}

fn resolve_prep(prep: &PrepArgs, seed: Option<u64>) -> Result<PrepConfig> {
    let base = match &prep.prep {
        Some(path) => read_json(path)?,
        None => PrepConfig::default(),
    };
    Ok(prep.apply(base, seed))
}

fn prepared(corpus: &CorpusArgs, prep: &PrepConfig, units: bool) -> Result<(Dataset, f64)> {
    let (manifest, raw) = load_corpus(corpus)?;
    let start = Instant::now();
    let data = prepare(manifest, raw, prep, units)?;
    Ok((data, start.elapsed().as_secs_f64()))
}

fn run_row(run: &SystemRun) -> (String, EvalReport) {
    (run.system.clone(), run.report)
}

fn experiment(command: ExperimentCommand, ctx: &Context) -> Result<()> {
    match command {
        ExperimentCommand::Run {
            corpus,
            system,
            prep,
            out,
        } => {
            let spec = resolve_system(&system);
            let prep = resolve_prep(&prep, Some(spec.hyperparameters.seed))?;
            let (data, prep_s) = prepared(&corpus, &prep, spec.needs_units())?;
            let run = run_system(&spec, &data)?;
            create_dir(&out.out)?;
            write_run(&out.out, &run.clustering, &run.report)?;
            print_table(&[run_row(&run)]);
            let mut config = corpus_config(&corpus);
            config["system"] = to_value(&spec)?;
            config["prep"] = to_value(&prep)?;
            let timings = json!({ "prep_s": prep_s, "runtime_s": run.report.runtime_s, "gamma_search": run.gamma });
            ctx.write_metadata(&out.out, "experiment run", config, timings)
        }
        ExperimentCommand::PerfectInit {
            corpus,
            system,
            prep,
            no_baseline,
            out,
        } => {
            let spec = resolve_system(&system);
            let prep = resolve_prep(&prep, Some(spec.hyperparameters.seed))?;
            let (data, prep_s) = prepared(&corpus, &prep, spec.needs_units())?;
            let result = perfect_init(&spec, &data)?;
            let baseline = if no_baseline { None } else { Some(run_system(&spec, &data)?) };
            create_dir(&out.out)?;
            write_run(&out.out, &result.converged.clustering, &result.converged.report)?;
            write_json(&deterministic(&result.initial), out.out.join("initial_report.json"))?;
            let mut rows = vec![
                ("label partition".to_string(), result.initial),
                (format!("{} converged", spec), result.converged.report),
            ];
            if let Some(b) = &baseline {
                write_json(&deterministic(&b.report), out.out.join("baseline_report.json"))?;
                rows.push((format!("{} baseline", spec), b.report));
            }
            print_table(&rows);
            let mut config = corpus_config(&corpus);
            config["system"] = to_value(&spec)?;
            config["prep"] = to_value(&prep)?;
            config["baseline"] = json!(!no_baseline);
            let timings = json!({
                "prep_s": prep_s,
                "runtime_s": result.converged.report.runtime_s,
                "baseline_runtime_s": baseline.as_ref().and_then(|b| b.report.runtime_s),
                "gamma_search": result.converged.gamma,
            });
            ctx.write_metadata(&out.out, "experiment perfect-init", config, timings)
        }
        ExperimentCommand::PerfectRepr {
            corpus,
            system,
            prep,
            mode,
            sigma,
            no_baseline,
            out,
        } => {
            let spec = resolve_system(&system);
            let mut prep = resolve_prep(&prep, Some(spec.hyperparameters.seed))?;
            prep.perfect_sigma = sigma;
            let (data, prep_s) = prepared(&corpus, &prep, spec.needs_units())?;
            let ideal = perfect_representations(&data, mode, sigma, SeedStream::new(spec.hyperparameters.seed).seed_for("perfect"))?;
            let run = run_system(&spec, &ideal)?;
            let baseline = if no_baseline { None } else { Some(run_system(&spec, &data)?) };
            create_dir(&out.out)?;
            write_run(&out.out, &run.clustering, &run.report)?;
            let mut rows = Vec::new();
            if let Some(b) = &baseline {
                write_json(&deterministic(&b.report), out.out.join("baseline_report.json"))?;
                rows.push((format!("{} baseline", spec), b.report));
            }
            rows.push((format!("{} perfect {}", spec, mode_name(mode)), run.report));
            print_table(&rows);
            let mut config = corpus_config(&corpus);
            config["system"] = to_value(&spec)?;
            config["prep"] = to_value(&prep)?;
            config["mode"] = to_value(&mode)?;
            config["sigma"] = json!(sigma);
            config["baseline"] = json!(!no_baseline);
            let timings = json!({
                "prep_s": prep_s,
                "runtime_s": run.report.runtime_s,
                "baseline_runtime_s": baseline.as_ref().and_then(|b| b.report.runtime_s),
                "gamma_search": run.gamma,
            });
            ctx.write_metadata(&out.out, "experiment perfect-repr", config, timings)
        }
        ExperimentCommand::Compare { corpus, config, out } => {
            let mut cfg = CompareConfig {
                prep: PrepConfig::default(),
                systems: None,
                seed: 0,
            };
            if let Some(path) = &config {
                // Either a bare list of systems or the full object.
                match read_json::<serde_json::Value>(path)? {
                    list @ serde_json::Value::Array(_) => cfg.systems = Some(serde_json::from_value(list)?),
                    object => cfg = serde_json::from_value(object)?,
                }
            }
            let specs = cfg.systems();
            let units = specs.iter().any(SystemSpec::needs_units);
            let (data, prep_s) = prepared(&corpus, &cfg.prep, units)?;
            let runs = compare_systems(&specs, &data)?;
            create_dir(&out.out)?;
            let clusterings = out.out.join("clusterings");
            create_dir(&clusterings)?;
            #[derive(Serialize)]
            struct Row<'a> {
                system: &'a str,
                report: EvalReport,
            }
            let mut rows = Vec::with_capacity(runs.len());
            for run in &runs {
                write_clustering(&run.clustering, clusterings.join(format!("{}.tsv", run.system)))?;
                rows.push(Row {
                    system: &run.system,
                    report: deterministic(&run.report),
                });
            }
            write_json(&rows, out.out.join("compare.json"))?;
            print_table(&runs.iter().map(run_row).collect::<Vec<_>>());
            let mut resolved = corpus_config(&corpus);
            resolved["compare"] = to_value(&CompareConfig {
                systems: Some(specs.clone()),
                ..cfg
            })?;
            let timings = json!({
                "prep_s": prep_s,
                "systems": runs
                    .iter()
                    .map(|r| json!({ "system": r.system, "runtime_s": r.report.runtime_s, "gamma_search": r.gamma }))
                    .collect::<Vec<_>>(),
            });
            ctx.write_metadata(&out.out, "experiment compare", resolved, timings)
        }
    }
}

fn mode_name(mode: lexicon_core::experiment::PerfectMode) -> &'static str {
    match mode {
        lexicon_core::experiment::PerfectMode::Embedding => "embeddings",
        lexicon_core::experiment::PerfectMode::Sequence => "sequences",
    }
}

fn synth_config(path: Option<&PathBuf>) -> Result<SynthConfig> {
    let config: SynthConfig = match path {
        Some(p) => read_json(p)?,
        None => SynthConfig::default(),
    };
    config.validate()?;
    Ok(config)
}

fn synth(command: SynthCommand, ctx: &Context) -> Result<()> {
    match command {
        SynthCommand::Generate {
            config,
            seed,
            sigma,
            out,
        } => {
            let mut config = synth_config(config.as_ref())?;
            if let Some(s) = seed {
                config.seed = s;
            }
            if let Some(s) = sigma {
                config.within_type_noise = s;
            }
            config.validate()?;
            let start = Instant::now();
            let corpus = generate(&config)?;
            let elapsed = start.elapsed().as_secs_f64();
            create_dir(&out.out)?;
            write_manifest(&corpus.manifest, out.out.join("manifest.jsonl"))?;
            write_features(out.out.join("features"), &corpus.features)?;
            write_json(&config, out.out.join("synth_config.json"))?;
            eprintln!(
                "{} segments of {} types written to {}",
                corpus.manifest.len(),
                config.n_types,
                out.out.display()
            );
            ctx.write_metadata(&out.out, "synth generate", to_value(&config)?, json!({ "generate_s": elapsed }))
        }
        SynthCommand::Sweep {
            config,
            system,
            sigmas,
            seeds,
            prep,
            out,
        } => {
            let config = synth_config(config.as_ref())?;
            if let Some(bad) = sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
                return Err(LexiconError::Argument(format!("noise levels must be finite and >= 0, got {bad}")));
            }
            let prep = resolve_prep(&prep, Some(system.hyperparameters.seed))?;
            let start = Instant::now();
            let rows = sweep_noise(&config, &sigmas, &seeds, &system, &prep)?;
            let elapsed = start.elapsed().as_secs_f64();
            create_dir(&out.out)?;
            let stripped: Vec<_> = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.reports.iter_mut().for_each(|x| x.runtime_s = None);
                    r.perfect_reports.iter_mut().for_each(|x| x.runtime_s = None);
                    r
                })
                .collect();
            write_json(&stripped, out.out.join("sweep.json"))?;
            println!("{:>8}  {:>12}  {:>10}  {:>20}", "sigma", "purity (%)", "V (%)", "perfect purity (%)");
            for r in &rows {
                let perfect = r.perfect_reports.iter().map(|p| p.purity).fold(f64::INFINITY, f64::min);
                println!("{:>8}  {:>12.1}  {:>10.1}  {:>20.1}", r.sigma, r.mean_purity, r.mean_v_measure, perfect);
            }
            let resolved = json!({
                "synth": config,
                "system": system,
                "sigmas": sigmas,
                "seeds": seeds,
                "prep": prep,
            });
            ctx.write_metadata(&out.out, "synth sweep", resolved, json!({ "sweep_s": elapsed }))
        }
    }
}
