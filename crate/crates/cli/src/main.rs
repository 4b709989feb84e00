//! `rbe`: command-line front end.
//!
//! Organization state lives in a state directory holding a journal of every
//! state-changing command plus the seed it was created with. Each invocation
//! replays the journal through the simulator and then runs one more command,
//! so all key material is derived inside the library and runs are
//! reproducible from the seed.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rbe_core::actors::{self, audit_secret_residency, Outcome, Phase, Simulator, Transcript};
use rbe_core::algebra::OpCounts;
use rbe_core::bench::{run_bench, BenchConfig};
use rbe_core::error::Error;
use rbe_core::hierarchy::RoleHierarchy;

const JOURNAL: &str = "journal.txt";

#[derive(Parser)]
#[command(name = "rbe", version, about = "Role-based encryption toolkit")]
struct Cli {
    /// State directory for organization keys and the command journal.
    #[arg(long, global = true, env = "RBE_STATE", default_value = "rbe-state")]
    state: PathBuf,
    /// Seed for new state directories, scenarios and benchmarks.
    #[arg(long, global = true, env = "RBE_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Print group operations performed outside library-measured scopes.
    #[arg(long, global = true, hide = true)]
    audit_ops: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Run the key ceremony for a new organization.
    InitOrg { org: String },
    /// Add a role, optionally under parent roles, or load a hierarchy file.
    AddRole {
        org: String,
        #[arg(required_unless_present = "from")]
        role: Option<String>,
        #[arg(long = "parent")]
        parents: Vec<String>,
        #[arg(long, conflicts_with_all = ["role", "parents"])]
        from: Option<PathBuf>,
    },
    /// Freeze the hierarchy and publish role public keys.
    GenRoleParams { org: String },
    RegisterUser { org: String, user: String },
    AssignRole { org: String, user: String, role: String },
    Encrypt {
        org: String,
        role: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    Decrypt {
        org: String,
        user: String,
        role: String,
        #[arg(long = "in")]
        input: PathBuf,
        /// Plaintext destination; stdout when omitted.
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
    Revoke { org: String, user: String },
    /// `from` shares its long-term secret with `to`, letting users of `from`
    /// decrypt joint ciphertexts hosted by `to`.
    LinkOrgs { from: String, to: String },
    Mencrypt {
        host: String,
        role: String,
        guest: String,
        guest_role: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: PathBuf,
    },
    Mdecrypt {
        org: String,
        user: String,
        role: String,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "out")]
        output: Option<PathBuf>,
    },
    /// Run a canned scenario by name or a script file in a fresh simulator.
    RunScenario { scenario: String },
    Bench {
        /// TOML file with security_level, iterations, max_ancestors,
        /// hierarchy_sizes and seed.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        iterations: Option<usize>,
        /// Exit 2 when any verdict fails.
        #[arg(long)]
        strict: bool,
    },
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            let msg = e.to_string();
            if msg.starts_with(e.name()) {
                eprintln!("error: {msg}");
            } else {
                eprintln!("error: {}: {msg}", e.name());
            }
            if e.is_crypto() || matches!(e, Error::Decode(_)) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn token(s: &str) -> CliResult<&str> {
    if s.is_empty() || s.contains('#') || s.chars().any(char::is_whitespace) {
        return Err(Failure::Usage(format!("invalid name {s:?}")));
    }
    Ok(s)
}

struct State {
    dir: PathBuf,
    sim: Simulator,
    journal: Vec<String>,
    audit: bool,
}

impl State {
    fn open(dir: &Path, seed: Option<u64>, create: bool, audit: bool) -> CliResult<State> {
        let path = dir.join(JOURNAL);
        let (seed, journal) = match fs::read_to_string(&path) {
            Ok(text) => parse_journal(&text)?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && create => {
                fs::create_dir_all(dir)?;
                (seed.unwrap_or_else(rand::random), Vec::new())
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Failure::Usage(format!(
                    "no state in {}; run init-org first",
                    dir.display()
                )))
            }
            Err(e) => return Err(e.into()),
        };
        let mut sim = Simulator::new(seed)?;
        sim.set_base_dir(dir);
        for (i, line) in journal.iter().enumerate() {
            sim.run_line(i + 1, line).map_err(|e| e.error)?;
        }
        Ok(State {
            dir: dir.to_path_buf(),
            sim,
            journal,
            audit,
        })
    }

    /// Runs one command without recording it.
    fn exec(&mut self, line: &str) -> CliResult<()> {
        let n = self.journal.len() + 1;
        self.sim.run_line(n, line).map_err(|e| Failure::Lib(e.error))
    }

    /// Runs one command and appends it to the journal.
    fn commit(&mut self, line: String) -> CliResult<()> {
        self.exec(&line)?;
        self.journal.push(line);
        let mut text = format!("seed {}\n", self.sim.seed());
        for l in &self.journal {
            text.push_str(l);
            text.push('\n');
        }
        fs::write(self.dir.join(JOURNAL), text)?;
        Ok(())
    }

    fn output(&self, name: &str) -> CliResult<Vec<u8>> {
        self.sim
            .file(name)
            .map(<[u8]>::to_vec)
            .ok_or_else(|| Failure::Lib(Error::Protocol(format!("command produced no {name}"))))
    }

    fn finish(self) {
        if self.audit {
            print_overhead(&self.sim);
        }
    }
}

fn parse_journal(text: &str) -> CliResult<(u64, Vec<String>)> {
    let mut lines = text.lines();
    let seed = lines
        .next()
        .and_then(|l| l.strip_prefix("seed "))
        .and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Failure::Usage("journal does not start with a seed line".into()))?;
    Ok((seed, lines.filter(|l| !l.trim().is_empty()).map(str::to_string).collect()))
}

fn hierarchy_file(org: &str) -> String {
    format!("hierarchy-{org}.txt")
}

/// Group operations counted by the context but not attributed to any
/// transcript step.
fn overhead(sim: &Simulator) -> OpCounts {
    let attributed = sim
        .transcript()
        .steps
        .iter()
        .fold(OpCounts::default(), |a, s| a + s.total_counts());
    sim.context().counter().snapshot() - attributed
}

fn print_overhead(sim: &Simulator) {
    eprintln!("cli overhead: {}", overhead(sim));
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let dir = cli.state.as_path();
    let audit = cli.audit_ops;
    match &cli.command {
        Command::InitOrg { org } => {
            let mut st = State::open(dir, cli.seed, true, audit)?;
            st.commit(format!("init-org {}", token(org)?))?;
            println!("initialized {org} (seed {})", st.sim.seed());
            st.finish();
        }
        Command::AddRole { org, role, parents, from } => {
            let st = State::open(dir, cli.seed, false, audit)?;
            if st.sim.phase(token(org)?) != Phase::Initialized {
                return Err(Error::Protocol(format!("roles of {org} can no longer change")).into());
            }
            let path = dir.join(hierarchy_file(org));
            let text = match (from, role) {
                (Some(f), _) => fs::read_to_string(f)?,
                (None, Some(role)) => {
                    let mut text = match fs::read_to_string(&path) {
                        Ok(t) => t,
                        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
                        Err(e) => return Err(e.into()),
                    };
                    text.push_str(&format!("role {}\n", token(role)?));
                    for p in parents {
                        text.push_str(&format!("edge {} {role}\n", token(p)?));
                    }
                    text
                }
                (None, None) => unreachable!("clap requires role or --from"),
            };
            // Intermediate hierarchies may still contain a role whose
            // complement is empty; everything else is rejected now.
            match RoleHierarchy::parse(org, &text) {
                Ok(_) | Err(Error::DegenerateRole(_)) => {}
                Err(e) => return Err(e.into()),
            }
            fs::write(&path, text)?;
            st.finish();
        }
        Command::GenRoleParams { org } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            let file = hierarchy_file(token(org)?);
            if !dir.join(&file).exists() {
                return Err(Failure::Usage(format!("{org} has no roles; run add-role first")));
            }
            st.commit(format!("add-hierarchy {org} {file}"))?;
            st.commit(format!("gen-role-params {org}"))?;
            let n = st.sim.hierarchy(org).map_or(0, |h| h.len());
            println!("published {n} role public keys for {org}");
            st.finish();
        }
        Command::RegisterUser { org, user } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.commit(format!("register {} {}", token(org)?, token(user)?))?;
            st.finish();
        }
        Command::AssignRole { org, user, role } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.commit(format!("assign {} {} {}", token(org)?, token(user)?, token(role)?))?;
            st.finish();
        }
        Command::Revoke { org, user } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.commit(format!("revoke {} {}", token(org)?, token(user)?))?;
            st.finish();
        }
        Command::LinkOrgs { from, to } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.commit(format!("link {} {}", token(from)?, token(to)?))?;
            st.finish();
        }
        Command::Encrypt { org, role, input, output } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.sim.put_file("cli-input", fs::read(input)?);
            st.exec(&format!("encrypt {} {} cli-input cli-ct", token(org)?, token(role)?))?;
            fs::write(output, st.output("cli-ct")?)?;
            st.finish();
        }
        Command::Mencrypt { host, role, guest, guest_role, input, output } => {
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.sim.put_file("cli-input", fs::read(input)?);
            st.exec(&format!(
                "mencrypt {} {} {} {} cli-input cli-ct",
                token(host)?,
                token(role)?,
                token(guest)?,
                token(guest_role)?
            ))?;
            fs::write(output, st.output("cli-ct")?)?;
            st.finish();
        }
        Command::Decrypt { org, user, role, input, output }
        | Command::Mdecrypt { org, user, role, input, output } => {
            let verb = if matches!(cli.command, Command::Decrypt { .. }) { "decrypt" } else { "mdecrypt" };
            let mut st = State::open(dir, cli.seed, false, audit)?;
            st.sim.put_file("cli-upload", fs::read(input)?);
            st.exec(&format!("upload {} cli-ct cli-upload", token(org)?))?;
            st.exec(&format!("{verb} {org} {} {} cli-ct cli-plain", token(user)?, token(role)?))?;
            write_output(output.as_deref(), &st.output("cli-plain")?)?;
            st.finish();
        }
        Command::RunScenario { scenario } => {
            let script = match actors::canned_scenario(scenario) {
                Some(s) => s.to_string(),
                None => fs::read_to_string(scenario).map_err(|e| {
                    Failure::Usage(format!(
                        "{scenario}: {e}; canned scenarios are {}",
                        actors::canned_scenario_names().join(", ")
                    ))
                })?,
            };
            let seed = cli.seed.unwrap_or(0);
            let (transcript, err) = match actors::run_scenario(&script, seed) {
                Ok(t) => (t, None),
                Err((t, e)) => (t, Some(e)),
            };
            let violations = audit_secret_residency(&transcript);
            match cli.format {
                Format::Text => {
                    print!("{}", transcript.to_text());
                    println!("residency violations: {}", violations.len());
                    for v in &violations {
                        println!("  step {}: {}", v.step, v.description);
                    }
                }
                Format::Machine => println!("{}", transcript_json(&transcript, &violations)),
            }
            if let Some(e) = err {
                eprintln!("script stopped at line {}: {}", e.line, e.command);
                return Err(e.error.into());
            }
            if !violations.is_empty() {
                return Err(Error::Protocol(format!("{} residency violations", violations.len())).into());
            }
        }
        Command::Bench { config, iterations, strict } => {
            let mut cfg = match config {
                Some(p) => toml::from_str::<BenchConfig>(&fs::read_to_string(p)?)
                    .map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
                None => BenchConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            if let Some(n) = iterations {
                cfg.iterations = *n;
            }
            let report = run_bench(&cfg)?;
            match cli.format {
                Format::Text => print!("{}", report.to_text()),
                Format::Machine => println!("{}", report.to_json()),
            }
            if *strict && !report.all_pass() {
                return Err(Error::Protocol("benchmark verdicts failed".into()).into());
            }
        }
    }
    Ok(())
}

fn transcript_json(t: &Transcript, violations: &[actors::Violation]) -> serde_json::Value {
    let steps: Vec<serde_json::Value> = t
        .steps
        .iter()
        .map(|s| {
            let outcome = match &s.outcome {
                Outcome::Ok => serde_json::json!({"status": "ok"}),
                Outcome::Plaintext { fingerprint, len } => {
                    serde_json::json!({"status": "plaintext", "fingerprint": fingerprint, "len": len})
                }
                Outcome::ExpectedError(e) => serde_json::json!({"status": "expected-error", "error": e}),
                Outcome::Failed(e) => serde_json::json!({"status": "failed", "error": e}),
            };
            serde_json::json!({
                "line": s.line,
                "command": s.command,
                "messages": s.messages().count(),
                "counts": s.total_counts(),
                "outcome": outcome,
            })
        })
        .collect();
    let violations: Vec<serde_json::Value> = violations
        .iter()
        .map(|v| serde_json::json!({"step": v.step, "description": v.description}))
        .collect();
    serde_json::json!({"seed": t.seed, "steps": steps, "violations": violations})
}
