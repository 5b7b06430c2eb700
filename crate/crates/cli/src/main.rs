use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vipatch::defenses::{
    attack_under_defense, calibrate_threshold, detector_error, Defense, DETECTOR_PERCENTILE,
};
use vipatch::evaluation::GroundTruth;
use vipatch::image::{load_image, load_infrared, load_labels, ImagePair};
use vipatch::metrics::{format_value, Metric, MetricTable, PointAnnotations};
use vipatch::pipeline::fixtures::{generate_fixtures, write_fixtures};
use vipatch::pipeline::{
    append_defense_rows, discover, load_attack, load_item, run_attack, run_batch, run_sweep,
    sample_items, sweep_csv, write_attack, AttackConfig, SweepParameter,
};
use vipatch::targets::{protocol, surrogate_for, Task};
use vipatch::Error;

#[derive(Parser)]
#[command(name = "vipatch", version, about = "Black-box adversarial patches for visible-infrared models")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a patch for one image pair.
    Attack {
        #[arg(long)]
        visible: PathBuf,
        #[arg(long)]
        infrared: PathBuf,
        /// Point annotations, one `x y` per line.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Ground-truth class map (8-bit PNG of class ids).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[command(flatten)]
        opts: AttackOpts,
    },
    /// Attack every `<name>_vis.png` / `<name>_ir.png` pair in a directory.
    Batch {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        opts: AttackOpts,
    },
    /// Re-evaluate stored attacks under defenses and append the results to
    /// their metrics.csv.
    Defend {
        /// Attack output directories.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// `none`, `jpeg[:Q]`, `median[:K]`, `mse:THETA`, or `mse` to
        /// calibrate the threshold on the given results' clean pairs.
        #[arg(long = "defense", default_values = ["median:3", "jpeg:75"])]
        defenses: Vec<String>,
    },
    /// Repeat a batch for each value of one parameter.
    Sweep {
        #[arg(long)]
        input: PathBuf,
        /// radius, colors or alpha.
        #[arg(long)]
        parameter: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        opts: AttackOpts,
    },
    /// Write seeded synthetic image pairs with point annotations.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Answer remote-model requests on stdin/stdout with a built-in surrogate.
    #[command(hide = true)]
    ServeSurrogate,
}

/// Attack settings. Values given here override the configuration file.
#[derive(Args, Default)]
struct AttackOpts {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// counting, segmentation or fusion.
    #[arg(long)]
    task: Option<String>,
    /// surrogate or remote.
    #[arg(long)]
    target: Option<String>,
    /// tcp://host:port or "stdio:program args".
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    timeout_ms: Option<u64>,
    #[arg(long)]
    max_in_flight: Option<usize>,
    #[arg(long)]
    radius: Option<usize>,
    /// Search the radius too, within MIN,MAX.
    #[arg(long, value_name = "MIN,MAX")]
    radius_range: Option<String>,
    #[arg(long)]
    colors: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Population size.
    #[arg(long)]
    pop: Option<usize>,
    /// DE scale factor.
    #[arg(long = "f")]
    scale_factor: Option<f64>,
    /// DE crossover rate.
    #[arg(long)]
    cr: Option<f64>,
    #[arg(long)]
    gens: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// full, position_only, random, visible_only or infrared_only.
    #[arg(long)]
    ablation: Option<String>,
    /// Infrared compression slope.
    #[arg(long)]
    beta: Option<f64>,
    /// Infrared compression offset.
    #[arg(long)]
    gamma: Option<f64>,
    /// Score segmentation against the supplied label maps.
    #[arg(long)]
    gt_reference: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Attack a seeded random sample of this many pairs.
    #[arg(long)]
    sample: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl AttackOpts {
    fn resolve(&self) -> vipatch::Result<AttackConfig> {
        let mut config = match &self.config {
            Some(path) => AttackConfig::load(path)?,
            None => AttackConfig::new(Task::Counting),
        };
        let mut pairs: Vec<(&str, String)> = Vec::new();
        let mut add = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k, v));
            }
        };
        add("task", self.task.clone());
        add("endpoint", self.endpoint.clone());
        add("timeout_ms", self.timeout_ms.map(|v| v.to_string()));
        add("max_in_flight", self.max_in_flight.map(|v| v.to_string()));
        add("target", self.target.clone());
        add("radius", self.radius.map(|v| v.to_string()));
        add("radius_range", self.radius_range.clone());
        add("colors", self.colors.map(|v| v.to_string()));
        add("alpha", self.alpha.map(|v| v.to_string()));
        add("pop", self.pop.map(|v| v.to_string()));
        add("f", self.scale_factor.map(|v| v.to_string()));
        add("cr", self.cr.map(|v| v.to_string()));
        add("gens", self.gens.map(|v| v.to_string()));
        add("patience", self.patience.map(|v| v.to_string()));
        add("seed", self.seed.map(|v| v.to_string()));
        add("ablation", self.ablation.clone());
        add("beta", self.beta.map(|v| v.to_string()));
        add("gamma", self.gamma.map(|v| v.to_string()));
        add("gt_reference", self.gt_reference.then(|| "true".to_string()));
        add("workers", self.workers.map(|v| v.to_string()));
        add("sample", self.sample.map(|v| v.to_string()));
        add("out", self.out.as_ref().map(|p| p.display().to_string()));
        for (k, v) in pairs {
            config.set(k, &v)?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Feasibility(_) => 2,
        Error::Io { .. } | Error::Format { .. } | Error::Dimension(_) | Error::InvalidValue(_) => 3,
        Error::Protocol { .. } | Error::Timeout { .. } => 4,
        Error::Oracle(_) => 5,
    }
}

fn read_points(path: &Path, dims: (usize, usize)) -> vipatch::Result<PointAnnotations> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    PointAnnotations::parse(&text, dims)
}

fn print_table(label: &str, t: &MetricTable) {
    let fields: Vec<String> = t
        .iter()
        .filter_map(|(m, v)| v.map(|v| format!("{}={}", m.name(), format_value(v))))
        .collect();
    println!("{label:<12} {}", fields.join(" "));
}

fn attack(
    visible: &Path,
    infrared: &Path,
    points: Option<&Path>,
    labels: Option<&Path>,
    opts: &AttackOpts,
) -> vipatch::Result<()> {
    let config = opts.resolve()?;
    let pair = ImagePair::new(load_image(visible)?, load_infrared(infrared)?)?;
    let truth = GroundTruth {
        points: points.map(|p| read_points(p, pair.dims())).transpose()?,
        labels: labels.map(load_labels).transpose()?,
    };
    let model = config.target.build(config.task)?;
    let outcome = run_attack(&config, &pair, &truth, model.as_ref())?;
    write_attack(&config.out, &config, &pair, &truth, &outcome)?;
    println!("genome       {}", outcome.genome);
    println!(
        "fitness      E={} S={} J={}",
        format_value(outcome.report.e_term),
        format_value(outcome.report.s_term),
        format_value(outcome.report.j)
    );
    print_table("clean", &outcome.clean_metrics);
    print_table("adversarial", &outcome.adversarial_metrics);
    println!("wrote {}", config.out.display());
    Ok(())
}

fn batch(input: &Path, opts: &AttackOpts) -> vipatch::Result<()> {
    let config = opts.resolve()?;
    let report = run_batch(&config, input)?;
    let (mean, std) = report.aggregate();
    println!("{} pairs", report.rows.len());
    print_table("mean", &mean);
    print_table("std", &std);
    println!("wrote {}", config.out.display());
    Ok(())
}

fn defend(results: &[PathBuf], specs: &[String]) -> vipatch::Result<()> {
    let stored = results.iter().map(|d| load_attack(d)).collect::<vipatch::Result<Vec<_>>>()?;
    let mut defenses = Vec::new();
    for spec in specs {
        if spec == "mse" || spec == "mse_detector" {
            let mut errors = Vec::new();
            for s in &stored {
                let model = s.config.target.build(s.config.task)?;
                errors.push(detector_error(&s.clean, model.as_ref(), &s.truth)?);
            }
            let threshold = calibrate_threshold(&errors, DETECTOR_PERCENTILE)?;
            log::info!("detector threshold {threshold:e} from {} clean pairs", errors.len());
            defenses.push(Defense::MseDetector { threshold });
        } else {
            defenses.push(spec.parse()?);
        }
    }
    for (dir, s) in results.iter().zip(&stored) {
        let model = s.config.target.build(s.config.task)?;
        let outcomes = defenses
            .iter()
            .map(|d| attack_under_defense(d, &s.clean, &s.adversarial, model.as_ref(), &s.truth))
            .collect::<vipatch::Result<Vec<_>>>()?;
        append_defense_rows(dir, &outcomes)?;
        for o in &outcomes {
            let effect = match s.config.task {
                Task::Counting => Metric::Game0,
                Task::Segmentation => Metric::Miou,
                Task::Fusion => Metric::Qabf,
            };
            let get = |t: &MetricTable| t.get(effect).map_or("-".to_string(), format_value);
            let flag = o
                .adversarial_detection
                .map_or(String::new(), |d| format!(" flagged={}", d.flagged));
            println!(
                "{} {}: {} clean={} adversarial={}{flag}",
                dir.display(),
                o.defense,
                effect.name(),
                get(&o.clean),
                get(&o.adversarial)
            );
        }
    }
    Ok(())
}

fn sweep(input: &Path, parameter: &str, values: &[f64], opts: &AttackOpts) -> vipatch::Result<()> {
    let config = opts.resolve()?;
    let parameter: SweepParameter = parameter.parse()?;
    let items = sample_items(&discover(input)?, config.sample, config.seed, |i| &i.name);
    let loaded = items.iter().map(load_item).collect::<vipatch::Result<Vec<_>>>()?;
    let points = run_sweep(&config, &loaded, parameter, values)?;
    let csv = sweep_csv(parameter, &points);
    std::fs::create_dir_all(&config.out).map_err(|source| Error::Io {
        path: config.out.clone(),
        source,
    })?;
    let path = config.out.join("sweep.csv");
    std::fs::write(&path, &csv).map_err(|source| Error::Io { path: path.clone(), source })?;
    print!("{csv}");
    println!("wrote {}", path.display());
    Ok(())
}

fn fixtures(out: &Path, count: usize, seed: u64) -> vipatch::Result<()> {
    write_fixtures(out, &generate_fixtures(count, seed))?;
    println!("wrote {count} pairs to {}", out.display());
    Ok(())
}

fn serve_surrogate() -> vipatch::Result<()> {
    let models: Vec<_> = Task::ALL.iter().map(|&t| (t, surrogate_for(t))).collect();
    let stdin = std::io::stdin().lock();
    let mut stdout = BufWriter::new(std::io::stdout().lock());
    protocol::serve(stdin, &mut stdout, |task, pair| {
        let (_, model) = models.iter().find(|(t, _)| *t == task).expect("every task has a surrogate");
        model.predict(pair)
    })
    .and_then(|_| stdout.flush())
    .map_err(|source| Error::Io {
        path: PathBuf::from("<stdio>"),
        source,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Attack {
            visible,
            infrared,
            points,
            labels,
            opts,
        } => attack(visible, infrared, points.as_deref(), labels.as_deref(), opts),
        Command::Batch { input, opts } => batch(input, opts),
        Command::Defend { results, defenses } => defend(results, defenses),
        Command::Sweep {
            input,
            parameter,
            values,
            opts,
        } => sweep(input, parameter, values, opts),
        Command::Fixtures { out, count, seed } => fixtures(out, *count, *seed),
        Command::ServeSurrogate => serve_surrogate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
