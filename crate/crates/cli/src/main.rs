mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use exr_core::bloom::{classify_statement, course_level, BloomError, ClueTable};
use exr_core::finding::{Finding, Severity};
use exr_core::minilang::{parse_program, evaluate, Status};
use exr_core::plans::{type_plan, PlanWarning, VerbMap, Weights};
use exr_core::rewrite::{diagnose, parse_term, RewriteError, RulePack};
use exr_core::sim::{simulate, StudentProfile};
use exr_core::specdsl::{check_spec, parse_spec, render, validate_spec, ExerciseSpec};
use exr_core::templates::{instantiate_exercise, parse_bindings, Produces, TemplatePack};
use serde_json::{json, Value};

use report::{Exit, Report};

#[derive(Parser)]
#[command(name = "exr", version, about = "Author, check and analyse programming exercises")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Emit one JSON report on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Clue table for classification.
    #[arg(long, global = true, value_name = "FILE")]
    clues: Option<PathBuf>,
    /// Verb-to-cell map for plan typing.
    #[arg(long, global = true, value_name = "FILE")]
    verb_map: Option<PathBuf>,
    /// Plan typing weights.
    #[arg(long, global = true, value_name = "FILE")]
    weights: Option<PathBuf>,
    /// Evaluation step budget.
    #[arg(long, global = true, default_value_t = 100_000)]
    fuel: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Run a mini-language program and print its effect.
    Eval { file: PathBuf },
    /// Validate exercises and type their plans. Directories are searched for `.exr` files.
    Check {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Instantiate an exercise from a template pack (`builtin` for the bundled one).
    Gen {
        pack: String,
        #[arg(long)]
        rule: String,
        #[arg(long = "bind", value_name = "K=V")]
        bind: Vec<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short = 'o', long = "output")]
        output: Option<PathBuf>,
    },
    /// Classify a learning-objective statement into a Bloom cell.
    Classify { statement: String },
    /// Explain an answer to a task with expert and buggy rules.
    Diagnose {
        /// Rule pack file, or a builtin name (`diff`, `lineq`).
        #[arg(long)]
        pack: String,
        #[arg(long)]
        task: String,
        #[arg(long)]
        answer: String,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
    },
    /// Walk an exercise plan with a simulated student.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        profile: PathBuf,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => Exit::Failure.code(),
            };
        }
    };
    let (report, exit, human) = match run(&cli) {
        Ok(done) => done,
        Err(e) => {
            let report = Report::failure(input_name(&cli.command), "Io", format!("{e:#}"), None);
            (report, Exit::Failure, None)
        }
    };
    if cli.global.json {
        println!("{}", serde_json::to_string_pretty(&report).expect("reports serialize"));
    } else {
        if let Some(text) = human {
            print!("{text}");
        }
        report.print_findings();
        if exit == Exit::Failure {
            eprintln!("exr: {}", report.findings.first().map(|f| f.message.as_str()).unwrap_or("failed"));
        }
    }
    exit.code()
}

fn input_name(cmd: &Command) -> String {
    match cmd {
        Command::Eval { file } | Command::Simulate { file, .. } => file.display().to_string(),
        Command::Check { paths } => paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" "),
        Command::Gen { pack, .. } => pack.clone(),
        Command::Classify { statement } => statement.clone(),
        Command::Diagnose { task, .. } => task.clone(),
    }
}

type Outcome = (Report, Exit, Option<String>);

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let g = &cli.global;
    match &cli.command {
        Command::Eval { file } => eval(file, g),
        Command::Check { paths } => check(paths, g),
        Command::Gen { pack, rule, bind, seed, output } => gen(pack, rule, bind, *seed, output.as_deref(), g),
        Command::Classify { statement } => classify(statement, g),
        Command::Diagnose { pack, task, answer, max_steps } => diagnose_cmd(pack, task, answer, *max_steps),
        Command::Simulate { file, profile, trials, seed } => simulate_cmd(file, profile, *trials, *seed, g),
    }
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn verb_map(g: &Global) -> anyhow::Result<VerbMap> {
    match &g.verb_map {
        Some(p) => VerbMap::parse(&read(p)?).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())),
        None => Ok(VerbMap::builtin().clone()),
    }
}

fn weights(g: &Global) -> anyhow::Result<Weights> {
    match &g.weights {
        Some(p) => Weights::parse(&read(p)?).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())),
        None => Ok(Weights::builtin()),
    }
}

fn eval(file: &Path, g: &Global) -> anyhow::Result<Outcome> {
    let input = file.display().to_string();
    let program = match parse_program(&read(file)?) {
        Ok(p) => p,
        Err(e) => return Ok((Report::failure(input, "ParseError", e.to_string(), Some(e.pos())), Exit::Failure, None)),
    };
    let effect = evaluate(&program, g.fuel);
    let (exit, findings) = match effect.status {
        Status::Completed => (Exit::Clean, vec![]),
        Status::FuelExhausted => (
            Exit::Warnings,
            vec![Finding::new(Severity::Warning, "FuelExhausted", format!("stopped after {} steps", effect.steps), None)],
        ),
        Status::RuntimeError { pos, .. } => (
            Exit::Errors,
            vec![Finding::new(Severity::Error, "RuntimeError", effect.status.to_string(), Some(pos))],
        ),
    };
    let mut human = effect.stdout.clone();
    if !human.is_empty() && !human.ends_with('\n') {
        human.push('\n');
    }
    for (name, value) in &effect.bindings {
        human.push_str(&format!("{name} = {value}\n"));
    }
    human.push_str(&format!("{} after {} steps\n", effect.status, effect.steps));
    Ok((Report::new(input, findings, serde_json::to_value(&effect)?), exit, Some(human)))
}

fn exr_files(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("cannot list {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|e| e.extension().is_some_and(|x| x == "exr"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn check_one(path: &Path, map: &VerbMap, w: &Weights, fuel: u64) -> anyhow::Result<(Report, Exit)> {
    let input = path.display().to_string();
    let spec = match parse_spec(&read(path)?) {
        Ok(s) => s,
        Err(e) => return Ok((Report::failure(input, e.code(), e.to_string(), e.pos()), Exit::Failure)),
    };
    let outcome = check_spec(&spec, map, w, fuel);
    let exit = Exit::from_findings(&outcome.findings);
    let findings = outcome.findings.clone();
    Ok((Report::new(input, findings, serde_json::to_value(&outcome)?), exit))
}

fn check(paths: &[PathBuf], g: &Global) -> anyhow::Result<Outcome> {
    let (map, w) = (verb_map(g)?, weights(g)?);
    let files = exr_files(paths)?;
    if files.is_empty() {
        anyhow::bail!("no .exr files found");
    }
    let mut reports = Vec::new();
    for f in &files {
        reports.push(check_one(f, &map, &w, g.fuel)?);
    }
    let exit = reports.iter().map(|(_, e)| *e).max_by_key(|e| *e as u8).unwrap_or(Exit::Clean);
    let mut human = String::new();
    for (r, e) in &reports {
        let id = r.payload.get("id").and_then(Value::as_str).unwrap_or("-");
        human.push_str(&format!("{} [{id}]: {}\n", r.input, summary_word(*e)));
        human.push_str(&r.findings_text());
    }
    if reports.len() == 1 {
        let (mut report, exit) = reports.pop().expect("one report");
        report.shown = true;
        return Ok((report, exit, Some(human)));
    }
    let findings = reports
        .iter()
        .flat_map(|(r, _)| {
            r.findings.iter().map(|f| Finding { message: format!("{}: {}", r.input, f.message), ..f.clone() })
        })
        .collect();
    let exercises: Vec<Value> = reports.iter().map(|(r, _)| serde_json::to_value(r)).collect::<Result<_, _>>()?;
    let input = paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(" ");
    let mut report = Report::new(input, findings, json!({ "exercises": exercises }));
    report.shown = true;
    Ok((report, exit, Some(human)))
}

fn summary_word(e: Exit) -> &'static str {
    match e {
        Exit::Clean => "clean",
        Exit::Warnings => "warnings",
        Exit::Errors => "errors",
        Exit::Failure => "unreadable",
    }
}

fn gen(pack: &str, rule: &str, bind: &[String], seed: u64, output: Option<&Path>, g: &Global) -> anyhow::Result<Outcome> {
    let loaded;
    let pack_ref = if pack == "builtin" {
        TemplatePack::builtin()
    } else {
        match TemplatePack::parse(&read(Path::new(pack))?) {
            Ok(p) => {
                loaded = p;
                &loaded
            }
            Err(e) => return Ok((Report::failure(pack, "TemplateError", e.to_string(), None), Exit::Failure, None)),
        }
    };
    let Some(template) = pack_ref.get(rule) else {
        return Ok((Report::failure(pack, "UnknownRule", format!("no rule `{rule}` in pack"), None), Exit::Failure, None));
    };
    let bindings = match parse_bindings(bind.iter().map(String::as_str)) {
        Ok(b) => b,
        Err(e) => return Ok((Report::failure(pack, "BadBinding", e, None), Exit::Failure, None)),
    };
    if template.produces != Produces::Spec {
        return Ok(match pack_ref.expand(template, &bindings) {
            Ok(text) => {
                let text = format!("{text}\n");
                write_output(output, &text)?;
                let human = if output.is_none() { Some(text.clone()) } else { None };
                (Report::new(pack, vec![], json!({ "rule": rule, "text": text })), Exit::Clean, human)
            }
            Err(e) => (Report::failure(pack, "TemplateError", e.to_string(), None), Exit::Errors, None),
        });
    }
    let spec = match instantiate_exercise(pack_ref, template, &bindings, seed, g.fuel) {
        Ok(s) => s,
        Err(e) => return Ok((Report::failure(pack, "GenerationFailed", e.to_string(), None), Exit::Errors, None)),
    };
    let text = render(&spec);
    write_output(output, &text)?;
    let validation = validate_spec(&spec, g.fuel);
    let exit = Exit::from_findings(&validation.findings);
    let payload = json!({ "rule": rule, "seed": seed, "id": spec.id, "text": text, "validation": validation });
    let human = if output.is_none() { Some(text) } else { None };
    Ok((Report::new(pack, validation.findings.clone(), payload), exit, human))
}

fn write_output(output: Option<&Path>, text: &str) -> anyhow::Result<()> {
    if let Some(path) = output {
        fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn classify(statement: &str, g: &Global) -> anyhow::Result<Outcome> {
    let loaded;
    let clues = match &g.clues {
        Some(p) => match ClueTable::parse(&read(p)?) {
            Ok(t) => {
                loaded = t;
                &loaded
            }
            Err(e) => return Ok((Report::failure(statement, "ClueTable", e.to_string(), None), Exit::Failure, None)),
        },
        None => ClueTable::builtin(),
    };
    Ok(match classify_statement(statement, clues) {
        Ok(cell) => {
            let payload = json!({
                "process": cell.process,
                "knowledge": cell.knowledge,
                "course_level": course_level(cell),
            });
            (Report::new(statement, vec![], payload), Exit::Clean, Some(format!("{cell}\n")))
        }
        Err(e) => {
            let code = match e {
                BloomError::CannotNormalize(_) => "CannotNormalize",
                BloomError::Unclassifiable(_) => "Unclassifiable",
                BloomError::Syntax { .. } => "ClueTable",
            };
            (Report::failure(statement, code, e.to_string(), None), Exit::Errors, None)
        }
    })
}

fn diagnose_cmd(pack: &str, task: &str, answer: &str, max_steps: usize) -> anyhow::Result<Outcome> {
    let loaded;
    let rules = match RulePack::builtin(pack) {
        Some(p) => p,
        None => match RulePack::parse(&read(Path::new(pack))?) {
            Ok(p) => {
                loaded = p;
                &loaded
            }
            Err(e) => return Ok((Report::failure(pack, "PackError", e.to_string(), None), Exit::Failure, None)),
        },
    };
    let parse = |src: &str| parse_term(src).map_err(|e| Report::failure(src, "ParseError", e.to_string(), None));
    let (task_t, answer_t) = match (parse(task), parse(answer)) {
        (Ok(t), Ok(a)) => (t, a),
        (Err(r), _) | (_, Err(r)) => return Ok((r, Exit::Failure, None)),
    };
    Ok(match diagnose(&task_t, &answer_t, rules, max_steps) {
        Ok(paths) => {
            let mut human = String::new();
            for (i, p) in paths.iter().enumerate() {
                human.push_str(&format!("path {} ({} buggy):\n", i + 1, p.buggy_steps));
                for s in &p.steps {
                    human.push_str(&format!("  {:<24} {:<6} {}\n", s.rule, format!("{:?}", s.kind).to_lowercase(), s.result));
                }
            }
            let findings = match paths.first() {
                Some(top) if top.buggy_steps > 0 => vec![Finding::new(
                    Severity::Info,
                    "BuggyExplanation",
                    format!("best explanation uses {} buggy step(s): {}", top.buggy_steps, top.rule_names().join(", ")),
                    None,
                )],
                _ => vec![],
            };
            let payload = json!({ "task": task_t.to_string(), "answer": answer_t.to_string(), "paths": paths });
            (Report::new(task, findings, payload), Exit::Clean, Some(human))
        }
        Err(e @ RewriteError::NoExplanation { .. }) => (Report::failure(task, "NoExplanation", e.to_string(), None), Exit::Errors, None),
        Err(e) => (Report::failure(task, "RewriteError", e.to_string(), None), Exit::Failure, None),
    })
}

fn simulate_cmd(file: &Path, profile: &Path, trials: u64, seed: u64, g: &Global) -> anyhow::Result<Outcome> {
    let input = file.display().to_string();
    let spec: ExerciseSpec = match parse_spec(&read(file)?) {
        Ok(s) => s,
        Err(e) => return Ok((Report::failure(input, e.code(), e.to_string(), e.pos()), Exit::Failure, None)),
    };
    let student = match StudentProfile::parse(&read(profile)?) {
        Ok(p) => p,
        Err(e) => return Ok((Report::failure(input, "ProfileError", e.to_string(), None), Exit::Failure, None)),
    };
    let Some(plan) = &spec.plan else {
        return Ok((Report::failure(input, "MissingPlan", "exercise has no plan", Some(spec.spans.exercise)), Exit::Errors, None));
    };
    if trials == 0 {
        return Ok((Report::failure(input, "BadTrials", "--trials must be at least 1", None), Exit::Failure, None));
    }
    let (map, w) = (verb_map(g)?, weights(g)?);
    let report = type_plan(plan, &map, &w);
    if let Some(x) = report.warnings.iter().find(|x| matches!(x, PlanWarning::PathExplosion { .. })) {
        return Ok((Report::failure(input, x.code(), x.message(), Some(x.pos())), Exit::Errors, None));
    }
    let outcome = simulate(plan, &student, &map, &w, seed, trials);
    let mut human = format!(
        "{} on {}: solved {}/{} ({:.1}%)\n",
        if student.label.is_empty() { "student" } else { &student.label },
        spec.id,
        outcome.solved,
        outcome.trials,
        100.0 * outcome.solved as f64 / outcome.trials as f64
    );
    for (site, n) in &outcome.misses {
        human.push_str(&format!("  miss at {site}: {n}\n"));
    }
    for (site, [l, r]) in &outcome.branch_counts {
        human.push_str(&format!("  choice at {site}: left {l}, right {r}\n"));
    }
    let payload = json!({ "profile": student, "outcome": outcome });
    Ok((Report::new(input, vec![], payload), Exit::Clean, Some(human)))
}
