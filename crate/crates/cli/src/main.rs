use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use oidcheck::entail::{
    decide_entails_with, decide_logical_equiv_with, EntailDecision, EntailOptions,
};
use oidcheck::eval::{chase, eval_ocq};
use oidcheck::fixtures::{
    gen_primitive, gen_random_sifo, PrimitiveSpec, RandomParams, SkolemStrategy,
};
use oidcheck::model::{flatten, Instance, SifoQuery, VarMap};
use oidcheck::oid_equiv::{decide_oid_equiv_with, EquivDecision, EquivOptions};
use oidcheck::oracle::{
    minimize_entail_counterexample, minimize_oid_counterexample, satisfies_sotgd,
    search_counterexample_entail, search_counterexample_oid, SearchConfig,
};
use oidcheck::parser::{
    parse_extended_instance, parse_instance, parse_rule, parse_rules, serialize_extended_instance,
    serialize_instance, serialize_rules,
};

const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(
    name = "oidcheck",
    version,
    about = "Decide oid-equivalence and entailment of sifo CQs"
)]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args)]
struct Opts {
    /// Emit a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Seed for randomized search and generation.
    #[arg(long, global = true, env = "OIDCHECK_SEED", default_value_t = 0)]
    seed: u64,
    /// Largest domain tried by counterexample search.
    #[arg(long, global = true, default_value_t = 4)]
    max_domain: usize,
    /// Random instances tried by counterexample search.
    #[arg(long, global = true, default_value_t = 2000)]
    budget: usize,
    /// Skip the cross-check between the two decision paths.
    #[arg(long, global = true)]
    no_dual_check: bool,
    /// Write the report here instead of stdout.
    #[arg(short, long, global = true)]
    output: Option<PathBuf>,
}

impl Opts {
    fn search(&self) -> SearchConfig {
        SearchConfig {
            max_domain: self.max_domain,
            budget: self.budget,
            seed: self.seed,
        }
    }

    fn equiv(&self) -> EquivOptions {
        EquivOptions {
            dual_check: !self.no_dual_check,
            search: Some(self.search()),
            ..EquivOptions::default()
        }
    }

    fn entail(&self) -> EntailOptions {
        EntailOptions {
            dual_check: !self.no_dual_check,
            ..EntailOptions::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a .rules, .facts or .xfacts file and print it normalized.
    Parse { file: PathBuf },
    /// Evaluate a rule on an instance.
    Eval { rules: PathBuf, facts: PathBuf },
    /// Print the flattened classical query.
    Flatten { rules: PathBuf },
    /// Evaluate a rule and replace created values by fresh constants.
    Chase { rules: PathBuf, facts: PathBuf },
    /// Check whether a source/target pair satisfies a rule read as an SO-tgd.
    Satisfies {
        source: PathBuf,
        target: PathBuf,
        rules: PathBuf,
    },
    #[command(subcommand)]
    Check(CheckCommand),
    #[command(subcommand)]
    Oracle(OracleCommand),
    #[command(subcommand)]
    Gen(GenCommand),
}

/// Decision procedures.
#[derive(Subcommand)]
enum CheckCommand {
    /// Whether two rules give oid-isomorphic results on every instance.
    OidEquiv { q1: PathBuf, q2: PathBuf },
    /// Whether the first rule logically entails the second.
    Entails {
        q1: PathBuf,
        q2: PathBuf,
        /// Check both directions and oid-equivalence as well.
        #[arg(long)]
        both: bool,
    },
    /// Entailment in both directions.
    LogicalEquiv { q1: PathBuf, q2: PathBuf },
}

/// Bounded brute-force search for counterexamples.
#[derive(Subcommand)]
enum OracleCommand {
    /// Look for an instance separating the two results.
    Oid { q1: PathBuf, q2: PathBuf },
    /// Look for a pair satisfying the first rule but not the second.
    Entail { q1: PathBuf, q2: PathBuf },
}

/// Query generators.
#[derive(Subcommand)]
enum GenCommand {
    /// A mapping primitive: add, adl, ma or gav.
    Primitive {
        #[arg(long)]
        kind: String,
        /// all, key:I,J,... (1-based) or random.
        #[arg(long, default_value = "all")]
        skolem: String,
        #[arg(long, value_delimiter = ',', required = true)]
        arities: Vec<usize>,
    },
    /// Random rules, one per seed starting at --seed.
    Random {
        #[arg(long, default_value_t = 1)]
        count: u64,
        #[arg(long, default_value_t = 3)]
        atoms: usize,
        #[arg(long, default_value_t = 5)]
        vars: usize,
        #[arg(long, default_value_t = 3)]
        max_arity: usize,
        #[arg(long, default_value_t = 2)]
        max_distinguished: usize,
        #[arg(long, default_value_t = 3)]
        max_creation: usize,
        #[arg(long)]
        random_position: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Parse { .. } => "parse",
            Command::Eval { .. } => "eval",
            Command::Flatten { .. } => "flatten",
            Command::Chase { .. } => "chase",
            Command::Satisfies { .. } => "satisfies",
            Command::Check(CheckCommand::OidEquiv { .. }) => "check oid-equiv",
            Command::Check(CheckCommand::Entails { .. }) => "check entails",
            Command::Check(CheckCommand::LogicalEquiv { .. }) => "check logical-equiv",
            Command::Oracle(OracleCommand::Oid { .. }) => "oracle oid",
            Command::Oracle(OracleCommand::Entail { .. }) => "oracle entail",
            Command::Gen(GenCommand::Primitive { .. }) => "gen primitive",
            Command::Gen(GenCommand::Random { .. }) => "gen random",
        }
    }
}

/// What a command produced: an exit code, a text rendering and the JSON
/// payload.
struct Report {
    code: u8,
    text: String,
    payload: Value,
}

fn to_value(v: impl Serialize) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn rule_file(path: &Path) -> anyhow::Result<SifoQuery> {
    parse_rule(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn facts_file(path: &Path) -> anyhow::Result<Instance> {
    parse_instance(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn verdict(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn indent(block: &str) -> String {
    block.lines().map(|l| format!("  {l}\n")).collect()
}

fn map_line(name: &str, m: &VarMap) -> String {
    format!("{name}: {m}\n")
}

fn equiv_text(d: &EquivDecision) -> String {
    let mut s = format!("oid-equivalent: {}\n", verdict(d.equivalent()));
    if let Some(w) = &d.witness {
        s += &map_line("pi", &w.pi);
        s += &map_line("h", &w.h_forward);
        s += &map_line("h'", &w.h_backward);
    }
    if let Some(r) = &d.refutation {
        s += &format!("stage: {}\ndetail: {}\n", r.stage.as_str(), r.detail);
        if let Some(ce) = &r.counterexample {
            s += "counterexample:\n";
            s += &indent(&serialize_instance(ce));
        }
    }
    s
}

fn entail_text(label: &str, d: &EntailDecision) -> String {
    let mut s = format!("{label}: {}\n", verdict(d.entails()));
    if let Some(w) = &d.witness {
        s += &map_line("h", &w.h);
        let y: Vec<String> = w.y_h.iter().map(|v| v.to_string()).collect();
        s += &format!("Y_h: {{{}}}\n", y.join(", "));
        s += &map_line("m", &w.jd_certificate);
    }
    if let Some(ce) = &d.counterexample {
        s += "source:\n";
        s += &indent(&serialize_instance(&ce.source));
        s += "target:\n";
        s += &indent(&serialize_instance(&ce.target));
    }
    s
}

fn run(cmd: &Command, opts: &Opts) -> anyhow::Result<Report> {
    Ok(match cmd {
        Command::Parse { file } => {
            let text = read(file)?;
            let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
            let ctx = || format!("in {}", file.display());
            let (kind, out) = match ext {
                "rules" => (
                    "rules",
                    serialize_rules(&parse_rules(&text).with_context(ctx)?),
                ),
                "facts" => (
                    "facts",
                    serialize_instance(&parse_instance(&text).with_context(ctx)?),
                ),
                "xfacts" => (
                    "xfacts",
                    serialize_extended_instance(&parse_extended_instance(&text).with_context(ctx)?),
                ),
                _ => bail!(
                    "{}: expected a .rules, .facts or .xfacts file",
                    file.display()
                ),
            };
            let items: Vec<&str> = out.lines().collect();
            let payload = json!({ "kind": kind, "items": items });
            Report {
                code: 0,
                text: out,
                payload,
            }
        }
        Command::Eval { rules, facts } => {
            let result = eval_ocq(&rule_file(rules)?, &facts_file(facts)?);
            Report {
                code: 0,
                text: serialize_extended_instance(&result),
                payload: json!({ "result": result }),
            }
        }
        Command::Flatten { rules } => {
            let flat = flatten(&rule_file(rules)?);
            Report {
                code: 0,
                text: format!("{flat}\n"),
                payload: json!({ "flattened": flat }),
            }
        }
        Command::Chase { rules, facts } => {
            let c = chase(&rule_file(rules)?, &facts_file(facts)?);
            Report {
                code: 0,
                text: serialize_instance(&c.target),
                payload: to_value(&c),
            }
        }
        Command::Satisfies {
            source,
            target,
            rules,
        } => {
            let q = rule_file(rules)?;
            let r = satisfies_sotgd(&facts_file(source)?, &facts_file(target)?, &q)?;
            let mut text = format!("satisfied: {}\n", verdict(r.satisfied));
            if let Some(t) = &r.witness_table {
                for (k, v) in t {
                    let args: Vec<String> = k.iter().map(|c| c.to_string()).collect();
                    text += &format!("  {}({}) = {v}\n", q.function(), args.join(","));
                }
            }
            if let Some(g) = &r.violating_group {
                let key: Vec<String> = g.key.iter().map(|c| c.to_string()).collect();
                text += &format!("violating group: ({})\n", key.join(","));
                for f in &g.required {
                    text += &format!("  requires {f}\n");
                }
            }
            Report {
                code: u8::from(!r.satisfied),
                text,
                payload: to_value(&r),
            }
        }
        Command::Check(CheckCommand::OidEquiv { q1, q2 }) => {
            let d = decide_oid_equiv_with(&rule_file(q1)?, &rule_file(q2)?, &opts.equiv())?;
            Report {
                code: u8::from(!d.equivalent()),
                text: equiv_text(&d),
                payload: to_value(&d),
            }
        }
        Command::Check(CheckCommand::Entails {
            q1,
            q2,
            both: false,
        }) => {
            let d = decide_entails_with(&rule_file(q1)?, &rule_file(q2)?, &opts.entail())?;
            Report {
                code: u8::from(!d.entails()),
                text: entail_text("entails", &d),
                payload: to_value(&d),
            }
        }
        Command::Check(CheckCommand::Entails { q1, q2, both: true }) => {
            let (q, qp) = (rule_file(q1)?, rule_file(q2)?);
            let le = decide_logical_equiv_with(&q, &qp, &opts.entail())?;
            let oe = decide_oid_equiv_with(&q, &qp, &opts.equiv())?;
            let text = format!(
                "logically equivalent: {}; oid-equivalent: {}\n{}{}",
                verdict(le.equivalent),
                verdict(oe.equivalent()),
                entail_text("forward", &le.forward),
                entail_text("backward", &le.backward),
            );
            Report {
                code: u8::from(!le.equivalent),
                text,
                payload: json!({
                    "logically_equivalent": le.equivalent,
                    "oid_equivalent": oe.equivalent(),
                    "forward": le.forward,
                    "backward": le.backward,
                    "oid": oe,
                }),
            }
        }
        Command::Check(CheckCommand::LogicalEquiv { q1, q2 }) => {
            let le = decide_logical_equiv_with(&rule_file(q1)?, &rule_file(q2)?, &opts.entail())?;
            let text = format!(
                "logically equivalent: {}\n{}{}",
                verdict(le.equivalent),
                entail_text("forward", &le.forward),
                entail_text("backward", &le.backward),
            );
            Report {
                code: u8::from(!le.equivalent),
                text,
                payload: to_value(&le),
            }
        }
        Command::Oracle(OracleCommand::Oid { q1, q2 }) => {
            let (q, qp) = (rule_file(q1)?, rule_file(q2)?);
            let found = search_counterexample_oid(&q, &qp, &opts.search())
                .map(|i| minimize_oid_counterexample(&q, &qp, &i));
            let mut text = format!("counterexample found: {}\n", verdict(found.is_some()));
            if let Some(i) = &found {
                text += &indent(&serialize_instance(i));
            }
            Report {
                code: u8::from(found.is_some()),
                text,
                payload: json!({ "found": found.is_some(), "counterexample": found }),
            }
        }
        Command::Oracle(OracleCommand::Entail { q1, q2 }) => {
            let (q, qp) = (rule_file(q1)?, rule_file(q2)?);
            let found = search_counterexample_entail(&q, &qp, &opts.search())
                .map(|(i, _)| minimize_entail_counterexample(&q, &qp, &i));
            let mut text = format!("counterexample found: {}\n", verdict(found.is_some()));
            if let Some((i, j)) = &found {
                text += "source:\n";
                text += &indent(&serialize_instance(i));
                text += "target:\n";
                text += &indent(&serialize_instance(j));
            }
            let (source, target) = found.clone().unzip();
            Report {
                code: u8::from(found.is_some()),
                text,
                payload: json!({ "found": found.is_some(), "source": source, "target": target }),
            }
        }
        Command::Gen(GenCommand::Primitive {
            kind,
            skolem,
            arities,
        }) => {
            let skolem = parse_skolem(skolem, opts.seed)?;
            let q = gen_primitive(&PrimitiveSpec {
                kind: kind.parse()?,
                skolem,
                arities: arities.clone(),
            })?;
            rules_report(vec![q])
        }
        Command::Gen(GenCommand::Random {
            count,
            atoms,
            vars,
            max_arity,
            max_distinguished,
            max_creation,
            random_position,
        }) => {
            let params = RandomParams {
                num_atoms: *atoms,
                num_vars: *vars,
                max_arity: *max_arity,
                max_distinguished: *max_distinguished,
                max_creation: *max_creation,
                random_position: *random_position,
            };
            let rules = (0..*count)
                .map(|i| gen_random_sifo(opts.seed.wrapping_add(i), &params))
                .collect::<Result<Vec<_>, _>>()?;
            rules_report(rules)
        }
    })
}

fn rules_report(rules: Vec<SifoQuery>) -> Report {
    Report {
        code: 0,
        text: serialize_rules(&rules),
        payload: json!({ "rules": rules }),
    }
}

fn parse_skolem(s: &str, seed: u64) -> anyhow::Result<SkolemStrategy> {
    let lower = s.to_ascii_lowercase();
    if lower == "all" {
        return Ok(SkolemStrategy::All);
    }
    if lower == "random" {
        return Ok(SkolemStrategy::Random(seed));
    }
    if let Some(rest) = lower.strip_prefix("key:") {
        let idx = rest
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad key positions `{rest}`"))?;
        return Ok(SkolemStrategy::Key(idx));
    }
    bail!("unknown skolemization `{s}`: expected all, key:I,J,... or random")
}

fn envelope(command: &str, code: u8, payload: Value) -> Value {
    let mut obj = Map::new();
    obj.insert("schemaVersion".into(), json!(SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    obj.insert("exitCode".into(), json!(code));
    match payload {
        Value::Object(fields) => obj.extend(fields),
        other => {
            obj.insert("result".into(), other);
        }
    }
    Value::Object(obj)
}

/// Writes the whole output at once; files are replaced atomically.
fn emit(output: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match output {
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("cannot write to {}", dir.display()))?;
            tmp.write_all(body.as_bytes())?;
            tmp.persist(path)
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.cmd.name();
    let (code, body) = match run(&cli.cmd, &cli.opts) {
        Ok(r) if cli.opts.json => {
            let v = envelope(name, r.code, r.payload);
            (
                r.code,
                serde_json::to_string_pretty(&v).expect("json") + "\n",
            )
        }
        Ok(r) => (r.code, r.text),
        Err(e) => {
            eprintln!("error: {e:#}");
            if !cli.opts.json {
                return ExitCode::from(2);
            }
            let v = envelope(name, 2, json!({ "error": format!("{e:#}") }));
            (2, serde_json::to_string_pretty(&v).expect("json") + "\n")
        }
    };
    if let Err(e) = emit(cli.opts.output.as_deref(), &body) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
