use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use foldrpp::{
    cross_validate, emit_asp, emit_pred_decls, explain_rules_english, fit, justify, load_csv,
    load_records, model_head, parse_asp, Evaluator, Hyperparams, PredTemplates, Program,
};

#[derive(Parser)]
#[command(
    name = "foldrpp",
    version,
    about = "Learn, apply and explain default rules with exceptions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a program from a labelled CSV file.
    Train(TrainArgs),
    /// Label every row of a CSV file with a learned program.
    Predict(PredictArgs),
    /// Print the justification tree for one row.
    Explain(ExplainArgs),
    /// k-fold cross-validation.
    Eval(EvalArgs),
}

#[derive(Args)]
struct Labelled {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Target column.
    #[arg(long)]
    target: String,
    /// Target value treated as the positive class.
    #[arg(long)]
    positive: String,
    /// Residual negatives tolerated per covered positive before exceptions are learned.
    #[arg(long, default_value_t = 0.5)]
    ratio: f64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    labelled: Labelled,
    /// Where to write the program; `#pred` declarations go next to it as `<stem>.pred.lp`.
    #[arg(long)]
    model: PathBuf,
    /// `#pred` templates to include in the declarations file.
    #[arg(long)]
    pred_file: Option<PathBuf>,
    /// Also print the rules in English.
    #[arg(long)]
    english: bool,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV file; a column named like the model's target is ignored.
    #[arg(long)]
    data: PathBuf,
    /// Output CSV (`id,label`); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Label written for rows the program does not cover (default: `not_<positive>`).
    #[arg(long)]
    negative: Option<String>,
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Zero-based row index in the data file.
    #[arg(long)]
    row: usize,
    /// `#pred` templates; defaults to `<model stem>.pred.lp` when that file exists.
    #[arg(long)]
    pred_file: Option<PathBuf>,
    /// Also print the rules in English.
    #[arg(long)]
    english: bool,
    /// Print the tree as JSON instead of indented text.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    labelled: Labelled,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave wall-clock times out of the table and the report.
    #[arg(long)]
    no_timing: bool,
}

enum Failure {
    Usage(anyhow::Error),
    Data(anyhow::Error),
    Internal(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Internal(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Data(e) | Failure::Internal(e) => e,
        }
    }
}

type Outcome = Result<(), Failure>;

fn data<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Data(e.into())
}

fn internal<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Internal(e.into())
}

fn hyperparams(l: &Labelled) -> Result<Hyperparams, Failure> {
    if !(l.ratio >= 0.0 && l.ratio.is_finite()) {
        return Err(Failure::Usage(anyhow!(
            "--ratio must be a non-negative number, got {}",
            l.ratio
        )));
    }
    Ok(Hyperparams { ratio: l.ratio })
}

fn pred_path(model: &Path) -> PathBuf {
    let stem = model
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    model.with_file_name(format!("{stem}.pred.lp"))
}

fn read_templates(path: &Path) -> Result<PredTemplates, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(data)?;
    PredTemplates::parse(&text)
        .with_context(|| format!("{}", path.display()))
        .map_err(data)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(data)
}

fn train(a: TrainArgs) -> Outcome {
    let hp = hyperparams(&a.labelled)?;
    let d = load_csv(&a.labelled.data, &a.labelled.target, &a.labelled.positive).map_err(data)?;
    let started = Instant::now();
    let program = fit(&d, hp).map_err(data)?;
    let elapsed = started.elapsed();
    let text = emit_asp(&program).map_err(data)?;
    parse_asp(&text, &d.schema().feature_names)
        .context("emitted program does not parse back")
        .map_err(internal)?;

    let user = match &a.pred_file {
        Some(p) => read_templates(p)?,
        None => PredTemplates::new(),
    };
    let ab_ids: Vec<_> = program.ab_rules().keys().copied().collect();
    write_file(&a.model, &text)?;
    write_file(
        &pred_path(&a.model),
        &emit_pred_decls(d.schema(), ab_ids.iter().copied(), &user),
    )?;

    let rules = program.rules().len();
    println!(
        "{}: {} clauses ({} rules, {} abnormal predicates) from {} rows",
        a.model.display(),
        program.clause_count(),
        rules,
        ab_ids.len(),
        d.len()
    );
    if a.english {
        let templates = user.with_defaults(d.schema(), ab_ids);
        print!(
            "{}",
            explain_rules_english(&program, &templates).map_err(data)?
        );
    }
    eprintln!("fit took {:.3} ms", elapsed.as_secs_f64() * 1e3);
    Ok(())
}

struct Loaded {
    program: Program,
    rows: Vec<Vec<foldrpp::Value>>,
    targets: Option<Vec<String>>,
}

fn load_model_and_rows(model: &Path, data_path: &Path) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(model)
        .with_context(|| format!("cannot read {}", model.display()))
        .map_err(data)?;
    let head = model_head(&text)
        .with_context(|| format!("{}", model.display()))
        .map_err(data)?;
    let target = head.as_ref().map(|(t, _)| t.as_str());
    let table = load_records(data_path, target).map_err(data)?;
    if table.rows.is_empty() {
        let program = Program::new(foldrpp::Schema {
            feature_names: table.feature_names,
            target_name: String::new(),
            positive_value: head.map(|(_, c)| c).unwrap_or_default(),
        });
        return Ok(Loaded {
            program,
            rows: Vec::new(),
            targets: None,
        });
    }
    let program = parse_asp(&text, &table.feature_names)
        .with_context(|| {
            format!(
                "{} does not match the columns of {}",
                model.display(),
                data_path.display()
            )
        })
        .map_err(data)?;
    Ok(Loaded {
        program,
        rows: table.rows,
        targets: table.targets,
    })
}

fn predict(a: PredictArgs) -> Outcome {
    let loaded = load_model_and_rows(&a.model, &a.data)?;
    let positive = loaded.program.schema().positive_value.clone();
    let negative = a
        .negative
        .clone()
        .unwrap_or_else(|| format!("not_{positive}"));
    let mut out = String::new();
    if !loaded.rows.is_empty() {
        out.push_str("id,label\n");
        let mut ev = Evaluator::new(&loaded.program);
        for (i, values) in loaded.rows.iter().enumerate() {
            ev.reset();
            let label = if ev.fired_rule(values).is_some() {
                &positive
            } else {
                &negative
            };
            out.push_str(&format!("{i},{label}\n"));
        }
    }
    match &a.out {
        Some(p) => write_file(p, &out)?,
        None => std::io::stdout()
            .write_all(out.as_bytes())
            .map_err(internal)?,
    }
    if let Some(targets) = &loaded.targets {
        if !loaded.rows.is_empty() {
            let mut ev = Evaluator::new(&loaded.program);
            let hits = loaded
                .rows
                .iter()
                .zip(targets)
                .filter(|(values, t)| {
                    ev.reset();
                    ev.fired_rule(values).is_some() == (**t == positive)
                })
                .count();
            eprintln!(
                "accuracy against the target column: {:.4}",
                hits as f64 / targets.len() as f64
            );
        }
    }
    Ok(())
}

fn explain(a: ExplainArgs) -> Outcome {
    let loaded = load_model_and_rows(&a.model, &a.data)?;
    let values = loaded.rows.get(a.row).ok_or_else(|| {
        Failure::Data(anyhow!(
            "row {} does not exist; {} has {} rows",
            a.row,
            a.data.display(),
            loaded.rows.len()
        ))
    })?;
    let templates = match &a.pred_file {
        Some(p) => Some(read_templates(p)?),
        None => {
            let sibling = pred_path(&a.model);
            if sibling.exists() {
                Some(read_templates(&sibling)?)
            } else {
                None
            }
        }
    };
    let prediction = justify(
        &loaded.program,
        values,
        templates.as_ref(),
        &a.row.to_string(),
    )
    .map_err(data)?;
    if a.json {
        let json = serde_json::to_string_pretty(&prediction.tree).map_err(internal)?;
        println!("{json}");
    } else {
        print!("{}", prediction.tree.render());
    }
    if a.english {
        let ab_ids = loaded.program.ab_rules().keys().copied();
        let t = templates
            .unwrap_or_default()
            .with_defaults(loaded.program.schema(), ab_ids);
        println!();
        print!(
            "{}",
            explain_rules_english(&loaded.program, &t).map_err(data)?
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Outcome {
    let hp = hyperparams(&a.labelled)?;
    if a.folds < 2 {
        return Err(Failure::Usage(anyhow!("--folds must be at least 2")));
    }
    let d = load_csv(&a.labelled.data, &a.labelled.target, &a.labelled.positive).map_err(data)?;
    let report = cross_validate(&d, a.folds, hp, a.seed).map_err(data)?;
    print!("{}", report.to_table(!a.no_timing));
    if let Some(p) = &a.out {
        write_file(p, &report.to_json(!a.no_timing))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Explain(a) => explain(a),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
