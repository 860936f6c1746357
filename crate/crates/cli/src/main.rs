use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use taskmodel::{
    build_kb, emit_db, emit_patterns, load_kb, mine, next_step_hints, oracle_closed, oracle_frequent, oracle_md,
    parse_action, parse_attempt, parse_db, random_db, save_kb, seqdim, Constraints, Error, Event, KbConfig,
    Limits, MineOptions, MinedPattern, Mode, OutputFormat, ProblemState, ReportHeader, SequenceDatabase,
    SessionState,
};

#[derive(Parser)]
#[command(name = "taskmodel", version, about = "Mine task models from action logs and recognize plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mine sequential patterns from a database file.
    Mine {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        mining: MiningArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Annotate patterns with closed dimension patterns.
        #[arg(long)]
        dims: bool,
    },
    /// Build a knowledge base from a directory of attempt files.
    BuildKb {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        mining: MiningArgs,
    },
    /// Track a session against a knowledge base and answer hint requests.
    Recognize {
        #[arg(long)]
        kb: PathBuf,
        /// Session script; standard input when absent.
        #[arg(long)]
        session: Option<PathBuf>,
        #[arg(long, default_value_t = taskmodel::recognizer::DEFAULT_SKIP_BUDGET)]
        skip_budget: usize,
    },
    /// Reference computations: print a random database, or mine one by brute force.
    Oracle {
        #[arg(long, conflicts_with = "input")]
        seed: Option<u64>,
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        mining: MiningArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long)]
        dims: bool,
    },
}

#[derive(Args)]
struct MiningArgs {
    /// Minimum support as a fraction of records.
    #[arg(long, conflicts_with = "minsup_abs")]
    minsup: Option<f64>,
    /// Minimum support as a record count.
    #[arg(long)]
    minsup_abs: Option<usize>,
    /// Minimum gap between consecutive actionsets.
    #[arg(long, default_value_t = 1)]
    c1: i64,
    /// Maximum gap between consecutive actionsets.
    #[arg(long)]
    c2: Option<i64>,
    /// Minimum pattern span.
    #[arg(long, default_value_t = 0)]
    c3: i64,
    /// Maximum pattern span.
    #[arg(long)]
    c4: Option<i64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Untimed)]
    mode: ModeArg,
    /// Report closed patterns only.
    #[arg(long)]
    closed: bool,
    /// Cluster action values.
    #[arg(long)]
    cluster: bool,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Tsv)]
    format: FormatArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Timed,
    Untimed,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Tsv,
    Json,
}

impl MiningArgs {
    /// Exits with a usage error when no support threshold was given.
    fn require_minsup(&self) {
        if self.minsup.is_none() && self.minsup_abs.is_none() {
            Cli::command()
                .error(ErrorKind::MissingRequiredArgument, "one of --minsup or --minsup-abs is required")
                .exit();
        }
    }

    fn constraints(&self) -> Result<Constraints, Error> {
        let base = match (self.minsup, self.minsup_abs) {
            (Some(f), _) => Constraints::fraction(f),
            (None, Some(n)) => Constraints::absolute(n),
            (None, None) => unreachable!("checked by require_minsup"),
        };
        let c = base.with_gaps(self.c1, self.c2).with_span(self.c3, self.c4);
        c.validate()?;
        Ok(c)
    }

    fn mode(&self) -> Mode {
        match self.mode {
            ModeArg::Timed => Mode::Timed,
            ModeArg::Untimed => Mode::Untimed,
        }
    }

    fn options(&self) -> MineOptions {
        MineOptions {
            closed: self.closed,
            cluster_values: self.cluster,
            backscan: None,
        }
    }
}

impl OutputArgs {
    fn format(&self) -> OutputFormat {
        match self.format {
            FormatArg::Tsv => OutputFormat::Tsv,
            FormatArg::Json => OutputFormat::Json,
        }
    }

    fn write(&self, text: &str) -> Result<(), Error> {
        match &self.out {
            Some(p) => write_file(p, text),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))
}

fn report(
    patterns: &[MinedPattern],
    db: &SequenceDatabase,
    c: &Constraints,
    mode: Mode,
    output: &OutputArgs,
) -> Result<(), Error> {
    let header = ReportHeader {
        minsup_abs: c.threshold(db.len()),
        records: db.len(),
        mode,
    };
    output.write(&emit_patterns(patterns, output.format(), &header))
}

fn run_mine(input: &Path, mining: &MiningArgs, output: &OutputArgs, dims: bool) -> Result<(), Error> {
    let db = parse_db(&read_file(input)?)?;
    let c = mining.constraints()?;
    let mode = mining.mode();
    let patterns = if dims {
        seqdim(&db, &c, mode, mining.options())?.iter().map(|p| p.to_mined()).collect()
    } else {
        mine(&db, &c, mode, mining.options())?
    };
    report(&patterns, &db, &c, mode, output)
}

fn run_build_kb(input: &Path, out: &Path, mining: &MiningArgs) -> Result<(), Error> {
    let mut files: Vec<PathBuf> = fs::read_dir(input)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", input.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let attempts = files
        .iter()
        .map(|p| parse_attempt(&read_file(p)?).map_err(|e| Error::InvalidArgument(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let config = KbConfig {
        constraints: mining.constraints()?,
        mode: mining.mode(),
        options: mining.options(),
    };
    let kb = build_kb(&attempts, &config)?;
    write_file(out, &save_kb(&kb))
}

fn run_recognize(kb_path: &Path, session: Option<&Path>, budget: usize) -> Result<(), Error> {
    let kb = load_kb(&read_file(kb_path)?)?;
    let script: Box<dyn BufRead> = match session {
        Some(p) => Box::new(io::Cursor::new(read_file(p)?)),
        None => Box::new(io::stdin().lock()),
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let mut state = SessionState::new(budget);
    // the last hint request: (length, rank)
    let mut last: Option<(usize, usize)> = None;
    for (i, line) in script.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (cmd, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        let rest = rest.trim();
        let request = match cmd {
            "state" => {
                let s = ProblemState::new(rest).map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
                state.observe(&kb, &Event::StateChange(s));
                last = None;
                None
            }
            "action" => {
                let actions = rest
                    .split_whitespace()
                    .map(parse_action)
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|message| Error::Parse { line: lineno, message })?;
                if actions.is_empty() {
                    return Err(Error::Parse {
                        line: lineno,
                        message: "action line without actions".into(),
                    });
                }
                state.observe(&kb, &Event::Action(actions));
                last = None;
                None
            }
            "hint" => {
                let n = if rest.is_empty() {
                    1
                } else {
                    rest.parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno,
                        message: format!("bad hint length `{rest}`: {e}"),
                    })?
                };
                Some((n, 0))
            }
            "more" => Some(last.map_or((4, 0), |(n, r)| (n + 3, r))),
            "alt" => Some(last.map_or((1, 1), |(n, r)| (n, r + 1))),
            other => {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("unknown command `{other}`"),
                })
            }
        };
        let io_err = |e: io::Error| Error::InvalidArgument(e.to_string());
        match request {
            None => {
                let label = state.current_state.as_ref().map_or("?", |s| s.as_str());
                writeln!(
                    out,
                    "track: state={label} actions={} candidates={} expertise={}",
                    state.actions_in_state.len(),
                    state.candidates.len(),
                    state.expertise_estimate.as_deref().unwrap_or("unknown")
                )
                .map_err(io_err)?;
            }
            Some((n, rank)) => {
                last = Some((n, rank));
                let hints = next_step_hints(&kb, &state, n).map_err(|e| Error::Parse {
                    line: lineno,
                    message: e.to_string(),
                })?;
                match hints.get(rank) {
                    Some(h) => {
                        let dest = h.destination.as_ref().map_or("?", |d| d.as_str());
                        writeln!(
                            out,
                            "hint: {h}  [support={} matched={} dims={} next_state={dest}]",
                            h.support, h.matched, h.md
                        )
                        .map_err(io_err)?;
                    }
                    None => writeln!(out, "hint: none").map_err(io_err)?,
                }
            }
        }
    }
    Ok(())
}

fn run_oracle(
    seed: Option<u64>,
    input: Option<&Path>,
    mining: &MiningArgs,
    output: &OutputArgs,
    dims: bool,
) -> Result<(), Error> {
    let Some(input) = input else {
        let db = random_db(seed.unwrap_or(1), &Limits::default());
        return output.write(&emit_db(&db));
    };
    let db = parse_db(&read_file(input)?)?;
    let c = mining.constraints()?;
    let mode = mining.mode();
    let patterns = if dims {
        oracle_md(&db, &c, mode)?.iter().map(|p| p.to_mined()).collect()
    } else {
        let all = oracle_frequent(&db, &c, mode, mining.cluster)?;
        if mining.closed {
            oracle_closed(&all, mode, &c)
        } else {
            all
        }
    };
    report(&patterns, &db, &c, mode, output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Mine { mining, .. } | Command::BuildKb { mining, .. } => mining.require_minsup(),
        Command::Oracle {
            input: Some(_), mining, ..
        } => mining.require_minsup(),
        _ => {}
    }
    let result = match &cli.command {
        Command::Mine {
            input,
            mining,
            output,
            dims,
        } => run_mine(input, mining, output, *dims),
        Command::BuildKb { input, out, mining } => run_build_kb(input, out, mining),
        Command::Recognize {
            kb,
            session,
            skip_budget,
        } => run_recognize(kb, session.as_deref(), *skip_budget),
        Command::Oracle {
            seed,
            input,
            mining,
            output,
            dims,
        } => run_oracle(*seed, input.as_deref(), mining, output, *dims),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
