use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgMatches, CommandFactory};
use ctsbench_core::io::{self, RunManifest};
use ctsbench_core::protocols::{self, MetricGroup, RetrievalConfig};
use ctsbench_core::schema::{self, DiscoveryParams};
use ctsbench_core::synth::{build_synth_dataset, SynthVariant};
use ctsbench_core::{
    align, embed, stats, validate_dataset, ConditionRecord, Direction, EmbeddingMatrix, EmbeddingRole, Error,
    MetricReport, ReportContext, Result,
};

use super::{Cli, Command, ContextArgs, MetricsCommand, ProtocolCommand, SchemaCommand, Variant};

/// Sidecar path: `report.json` -> `report.manifest.json`, `out/dir` -> `out/dir.manifest.json`.
fn manifest_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.manifest.json"))
}

/// Command path and raw flag values of the innermost subcommand.
fn invocation(matches: &ArgMatches) -> (String, BTreeMap<String, String>) {
    let mut names = vec!["ctsbench".to_string()];
    let mut m = matches;
    let mut cmd = Cli::command();
    while let Some((name, sub)) = m.subcommand() {
        names.push(name.to_string());
        m = sub;
        cmd = cmd.find_subcommand(name).cloned().expect("parsed subcommand exists");
    }
    let mut flags = BTreeMap::new();
    for arg in cmd.get_arguments() {
        let id = arg.get_id().as_str();
        if let Ok(Some(raw)) = m.try_get_raw(id) {
            let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
            flags.insert(id.to_string(), values.join(","));
        }
    }
    (names.join(" "), flags)
}

struct Run {
    manifest: RunManifest,
    start: Instant,
}

impl Run {
    fn new(matches: &ArgMatches) -> Self {
        let (command, flags) = invocation(matches);
        let mut manifest = RunManifest::new(command);
        manifest.flags = flags;
        Self { manifest, start: Instant::now() }
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.add_input(path).map_err(|e| match e {
            Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))),
            e => e,
        })
    }

    fn seed(&mut self, seed: u64) {
        self.manifest.seeds.push(seed);
    }

    fn finish(mut self, out: &Path) -> Result<()> {
        self.manifest.wall_time_s = self.start.elapsed().as_secs_f64();
        io::write_canonical(&self.manifest, manifest_path(out))
    }
}

fn context(c: &ContextArgs) -> ReportContext {
    ReportContext { dataset_id: c.dataset_id.clone(), model_id: c.model_id.clone(), seed: c.seed }
}

fn read_ts_embeddings(run: &mut Run, path: &Path) -> Result<EmbeddingMatrix> {
    run.input(path)?;
    io::read_embeddings(path, EmbeddingRole::TimeSeries)
}

fn read_text_embeddings(run: &mut Run, path: &Path) -> Result<EmbeddingMatrix> {
    run.input(path)?;
    io::read_embeddings(path, EmbeddingRole::Text)
}

/// Reads an `(n, P, d)` tensor as one `(P, d)` matrix per series.
fn read_grouped(run: &mut Run, path: &Path, role: EmbeddingRole) -> Result<Vec<EmbeddingMatrix>> {
    run.input(path)?;
    let raw = io::read_raw(path)?;
    if let Some(i) = raw.non_finite_position() {
        return Err(Error::Format(format!("{}: non-finite value at element {i}", path.display())));
    }
    let [n, p, d] = raw.shape[..] else {
        return Err(Error::Shape(format!("{}: expected a rank-3 tensor, got shape {:?}", path.display(), raw.shape)));
    };
    let values: Vec<f64> = raw.data.iter().map(|&v| f64::from(v)).collect();
    (0..n)
        .map(|i| EmbeddingMatrix::new(values[i * p * d..(i + 1) * p * d].to_vec(), p, d, role))
        .collect()
}

fn attr_vectors(conditions: &[ConditionRecord], schema: &ctsbench_core::AttributeSchema, what: &str) -> Result<Vec<Vec<usize>>> {
    conditions
        .iter()
        .map(|c| {
            c.attr_vector(schema).into_iter().zip(&schema.attributes).map(|(v, a)| {
                v.ok_or_else(|| Error::InvalidInput(format!("{what}: '{}' lacks attribute '{}'", c.sample_id, a.name)))
            })
            .collect()
        })
        .collect()
}

pub(crate) fn run(command: Command, matches: &ArgMatches) -> Result<()> {
    let mut run = Run::new(matches);
    match command {
        Command::Synth(a) => {
            let variant = match a.variant {
                Variant::U => SynthVariant::U,
                Variant::M => SynthVariant::M,
            };
            run.seed(a.seed);
            let ds = build_synth_dataset(variant, a.seed, a.n_per_combo, a.length)?;
            ds.write(&a.out)?;
            eprintln!("wrote {} samples to {}", ds.series.n_samples(), a.out.display());
            run.finish(&a.out)
        }
        Command::Metrics(m) => metrics(m, run),
        Command::Protocol(p) => protocol(p, run),
        Command::Schema(s) => schema_cmd(s, run),
        Command::Validate(a) => {
            run.input(&a.series)?;
            run.input(&a.conditions)?;
            run.input(&a.schema)?;
            let series = io::read_series(&a.series)?;
            let conditions = io::read_conditions(&a.conditions)?;
            let schema: ctsbench_core::AttributeSchema = serde_json::from_slice(&fs::read(&a.schema)?)?;
            let report = validate_dataset(&series, &conditions, &schema);
            if let Some(out) = &a.out {
                io::write_canonical(&report, out)?;
                run.finish(out)?;
            }
            for v in &report.violations {
                eprintln!("{:?}: {}", v.kind, v.message);
            }
            if report.passed() {
                eprintln!("ok");
                Ok(())
            } else {
                Err(Error::Contract(format!("{} violation(s)", report.violations.len())))
            }
        }
    }
}

fn metrics(command: MetricsCommand, mut run: Run) -> Result<()> {
    match command {
        MetricsCommand::Stat { train, real, gen, bins, max_lag, out, context: c } => {
            for p in [&train, &real, &gen] {
                run.input(p)?;
            }
            let train = io::read_series(&train)?;
            let real = io::read_series(&real)?;
            let gen = io::read_series(&gen)?;
            let spec = stats::HistogramSpec::from_training(&train, bins)?;
            let mut report = MetricReport::new(context(&c));
            report.push("mdd", stats::mdd(&real, &gen, &spec)?, Direction::LowerBetter)?;
            report.push("acd", stats::acd(&real, &gen, max_lag)?, Direction::LowerBetter)?;
            report.push("sd", stats::sd(&real, &gen)?, Direction::LowerBetter)?;
            report.push("kd", stats::kd(&real, &gen)?, Direction::LowerBetter)?;
            io::emit_report(&report, &out)?;
            run.finish(&out)
        }
        MetricsCommand::Embed { real_emb, gen_emb, cond_emb, k, out, context: c } => {
            let real = read_ts_embeddings(&mut run, &real_emb)?;
            let gen = read_ts_embeddings(&mut run, &gen_emb)?;
            let mut report = MetricReport::new(context(&c));
            report.push("fid", embed::fid(&real, &gen)?, Direction::LowerBetter)?;
            report.push("precision", embed::precision(&real, &gen, k)?, Direction::HigherBetter)?;
            report.push("recall", embed::recall(&real, &gen, k)?, Direction::HigherBetter)?;
            if let Some(path) = cond_emb {
                let cond = read_text_embeddings(&mut run, &path)?;
                // The CTTP score needs series and text in one shared space.
                if cond.dim() == gen.dim() {
                    report.push("cttp_score", embed::cttp_score(&gen, &cond)?, Direction::HigherBetter)?;
                }
                report.push("j_ftsd", embed::j_ftsd(&real, &gen, &cond)?, Direction::LowerBetter)?;
                let (jp, jr) = embed::joint_precision_recall(&real, &gen, &cond, k)?;
                report.push("joint_precision", jp, Direction::HigherBetter)?;
                report.push("joint_recall", jr, Direction::HigherBetter)?;
            }
            io::emit_report(&report, &out)?;
            run.finish(&out)
        }
        MetricsCommand::Align { refs, gen_bundle, k_per_sample, out, context: c } => {
            run.input(&refs)?;
            run.input(&gen_bundle)?;
            let refs = io::read_series(&refs)?;
            let bundle = align::GenerationBundle::new(io::read_series(&gen_bundle)?, k_per_sample)?;
            let mut report = MetricReport::new(context(&c));
            report.push("dtw", align::dtw_score(&refs, &bundle)?, Direction::LowerBetter)?;
            report.push("crps", align::crps_score(&refs, &bundle)?, Direction::LowerBetter)?;
            io::emit_report(&report, &out)?;
            run.finish(&out)
        }
    }
}

fn protocol(command: ProtocolCommand, mut run: Run) -> Result<()> {
    match command {
        ProtocolCommand::Retrieval { gen_emb, text_emb, conditions, pool_size, repeats, out, context: c } => {
            let gen = read_ts_embeddings(&mut run, &gen_emb)?;
            let text = read_text_embeddings(&mut run, &text_emb)?;
            let captions = match &conditions {
                Some(p) => {
                    run.input(p)?;
                    Some(io::read_conditions(p)?.into_iter().map(|r| r.text).collect::<Vec<_>>())
                }
                None => None,
            };
            run.seed(c.seed);
            let cfg = RetrievalConfig { pool_size, repeats, seed: c.seed };
            let acc = protocols::retrieval_acc1(&gen, &text, captions.as_deref(), &cfg)?;
            let mut report = MetricReport::new(context(&c));
            report.push("retrieval_acc1", acc, Direction::HigherBetter)?;
            io::emit_report(&report, &out)?;
            run.finish(&out)
        }
        ProtocolCommand::Temporal { segment_emb, text_emb, out } => {
            let segments = read_grouped(&mut run, &segment_emb, EmbeddingRole::TimeSeries)?;
            let texts = read_grouped(&mut run, &text_emb, EmbeddingRole::Text)?;
            let result = protocols::temporal_order_eval(&segments, &texts)?;
            io::write_canonical(&result, &out)?;
            run.finish(&out)
        }
        ProtocolCommand::Compgen {
            train_conditions,
            test_conditions,
            schema,
            k,
            gen_emb,
            ref_emb,
            text_emb,
            pool_size,
            repeats,
            seed,
            fraction,
            out,
        } => {
            for p in [&train_conditions, &test_conditions, &schema] {
                run.input(p)?;
            }
            let schema = io::read_schema(&schema)?;
            let train = io::read_conditions(&train_conditions)?;
            let test = io::read_conditions(&test_conditions)?;
            let train_attrs = attr_vectors(&train, &schema, "train conditions")?;
            let test_attrs = attr_vectors(&test, &schema, "test conditions")?;
            let gen = read_ts_embeddings(&mut run, &gen_emb)?;
            let reference = read_ts_embeddings(&mut run, &ref_emb)?;
            let text = read_text_embeddings(&mut run, &text_emb)?;
            let captions: Vec<String> = test.into_iter().map(|r| r.text).collect();
            run.seed(seed);
            let cfg = RetrievalConfig { pool_size, repeats, seed };
            let result = protocols::compositional_analysis(
                &train_attrs,
                &test_attrs,
                k,
                &gen,
                &reference,
                &text,
                Some(&captions),
                &cfg,
                fraction,
            )?;
            io::write_canonical(&result, &out)?;
            run.finish(&out)
        }
        ProtocolCommand::Droprate { acc_real, acc_gen, acc_rand, out, context: c } => {
            let value = protocols::drop_rate(acc_real, acc_gen, acc_rand)?;
            let mut report = MetricReport::new(context(&c));
            report.push("drop_rate", value, Direction::LowerBetter)?;
            io::emit_report(&report, &out)?;
            run.finish(&out)
        }
        ProtocolCommand::Rank { reports, grouping, out, csv } => {
            let mut all = Vec::new();
            for p in &reports {
                run.input(p)?;
                all.extend(io::read_reports(p)?);
            }
            run.input(&grouping)?;
            let grouping: BTreeMap<String, MetricGroup> = serde_json::from_slice(&fs::read(&grouping)?)?;
            let table = protocols::aggregate_ranks(&all, &grouping)?;
            io::write_canonical(&table, &out)?;
            if let Some(csv) = csv {
                fs::write(&csv, table.to_csv())?;
            }
            run.finish(&out)
        }
    }
}

fn schema_cmd(command: SchemaCommand, mut run: Run) -> Result<()> {
    match command {
        SchemaCommand::Discover { captions, proposer, batch, stable, max_iter, seed, out, trace } => {
            run.input(&captions)?;
            let corpus = io::read_lines(&captions)?;
            let mut proposer = schema::open_proposer(&proposer)?;
            run.seed(seed);
            let params = DiscoveryParams { batch_size: batch, stability: stable, max_iter, seed, ..Default::default() };
            let d = schema::discover(&corpus, &mut proposer, &params)?;
            io::write_schema(&d.schema, &out)?;
            if let Some(trace) = trace {
                io::write_canonical(&d, trace)?;
            }
            eprintln!("{} after {} rounds", if d.converged { "converged" } else { "not converged" }, d.rounds);
            run.finish(&out)
        }
        SchemaCommand::Assign { captions, schema: schema_path, proposer, batch, id_prefix, out } => {
            run.input(&captions)?;
            run.input(&schema_path)?;
            let captions = io::read_lines(&captions)?;
            let s = io::read_schema(&schema_path)?;
            let mut proposer = schema::open_proposer(&proposer)?;
            let rows = schema::assign_batch(&captions, &s, &mut proposer, batch)?;
            let records: Vec<ConditionRecord> = captions
                .into_iter()
                .zip(rows)
                .enumerate()
                .map(|(i, (text, row))| ConditionRecord {
                    sample_id: format!("{id_prefix}-{i:06}"),
                    text,
                    attrs: s.attributes.iter().map(|a| a.name.clone()).zip(row).collect(),
                    label: 0,
                })
                .collect();
            io::write_conditions(&records, &out)?;
            run.finish(&out)
        }
        SchemaCommand::Label { conditions, schema: schema_path, table, table_out, out } => {
            run.input(&conditions)?;
            run.input(&schema_path)?;
            let mut records = io::read_conditions(&conditions)?;
            let s = io::read_schema(&schema_path)?;
            let names = s.label_attribute_names();
            let full = attr_vectors(&records, &s, "conditions")?;
            let vectors: Vec<Vec<usize>> = full
                .iter()
                .map(|v| s.attributes.iter().zip(v).filter(|(a, _)| names.contains(&a.name.as_str())).map(|(_, &x)| x).collect())
                .collect();
            let labels = match table {
                Some(path) => {
                    run.input(&path)?;
                    let table: schema::ComboTable = serde_json::from_slice(&fs::read(&path)?)?;
                    table.apply(&vectors)?
                }
                None => {
                    let (labels, table) = schema::index_labels(&vectors)?;
                    if let Some(path) = table_out {
                        io::write_canonical(&table, path)?;
                    }
                    labels
                }
            };
            for (r, l) in records.iter_mut().zip(labels) {
                r.label = l;
            }
            io::write_conditions(&records, &out)?;
            run.finish(&out)
        }
    }
}
