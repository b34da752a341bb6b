use std::io::{BufRead, Write};
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use flowlet_core::check::{check_all, CheckOptions};
use flowlet_core::gen::{check_program, GenOptions};
use flowlet_core::interp::{run_with_modules, Outcome, DEFAULT_FUEL};
use flowlet_core::modules::FileSystemView;
use flowlet_core::report::{Diagnostic, ErrorReport};
use flowlet_core::sched::DEFAULT_BUCKET;
use flowlet_core::server::{init_server, ChangeSet, ServerState};
use flowlet_core::solve::Graph;
use flowlet_core::syntax::{parse_and_rename, program_json, FileId, Program};
use serde_json::json;

#[derive(Parser)]
#[command(name = "flowlet", version, about = "Flow-sensitive type checker for .fc programs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct CheckFlags {
    /// Worker threads.
    #[arg(long, env = "FLOWLET_WORKERS", default_value_t = 1)]
    workers: usize,
    /// Files handed to a worker at once.
    #[arg(long, default_value_t = DEFAULT_BUCKET)]
    bucket: usize,
    /// Do not refine types at conditionals.
    #[arg(long)]
    no_refinements: bool,
}

impl CheckFlags {
    fn options(&self) -> CheckOptions {
        CheckOptions {
            workers: self.workers.max(1),
            bucket: self.bucket.max(1),
            gen: GenOptions { refinements: !self.no_refinements },
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Check every .fc file under a directory.
    Check {
        root: PathBuf,
        #[command(flatten)]
        flags: CheckFlags,
        /// Human-readable output instead of JSON.
        #[arg(long)]
        pretty: bool,
    },
    /// Keep checking state and apply change sets.
    ///
    /// Without flags, reads one command per line from stdin: `status`, or a
    /// JSON change set {"added":[],"modified":[],"deleted":[]}.
    Server {
        root: PathBuf,
        #[command(flatten)]
        flags: CheckFlags,
        /// Print the current errors and exit.
        #[arg(long)]
        status: bool,
        /// Apply a JSON change set, print the rechecked files and exit.
        #[arg(long)]
        apply: Option<PathBuf>,
    },
    /// Run a program and print its outcome.
    Eval {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
    },
    /// Print the renamed AST as JSON.
    DumpAst { file: PathBuf },
    /// Print the generated constraints, one per line.
    DumpConstraints {
        file: PathBuf,
        #[arg(long)]
        no_refinements: bool,
    },
    /// Print the closed constraint graph in DOT format.
    DumpGraph {
        file: PathBuf,
        #[arg(long)]
        no_refinements: bool,
    },
    /// Print the canonical signature of a file.
    DumpSignature {
        file: PathBuf,
        /// Directory that module paths are relative to. Defaults to the file's directory.
        #[arg(long)]
        root: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Internal(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut out = std::io::stdout().lock();
    match run(cli.cmd, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_dir(root: &Path) -> Result<FileSystemView, Failure> {
    if !root.is_dir() {
        return Err(Failure::Usage(format!("{} is not a directory", root.display())));
    }
    FileSystemView::load_dir(root).map_err(|e| Failure::Internal(e.to_string()))
}

fn load_program(file: &Path) -> Result<Result<Program, Vec<Diagnostic>>, Failure> {
    let src = std::fs::read_to_string(file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
    let id = FileId::intern(&file.to_string_lossy());
    Ok(parse_and_rename(&src, id).map_err(|es| es.iter().map(Diagnostic::from_syntax).collect()))
}

fn print_syntax_errors(out: &mut impl Write, ds: Vec<Diagnostic>) -> Result<u8, Failure> {
    let report = ErrorReport::new(1, ds);
    writeln!(out, "{}", report.to_json()).map_err(io)?;
    Ok(1)
}

fn io(e: std::io::Error) -> Failure {
    Failure::Internal(e.to_string())
}

/// Split a file path into a directory to load and the file's key within it.
fn split_file(file: &Path, root: Option<&Path>) -> Result<(PathBuf, String), Failure> {
    let root = match root {
        Some(r) => r.to_path_buf(),
        None => file.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new(".")).to_path_buf(),
    };
    let parts = |p: &Path| -> Vec<String> {
        p.components()
            .filter(|c| !matches!(c, Component::CurDir))
            .map(|c| c.as_os_str().to_string_lossy().into_owned())
            .collect()
    };
    let (f, r) = (parts(file), parts(&root));
    if !f.starts_with(&r) || f.len() == r.len() {
        return Err(Failure::Usage(format!("{} is not under {}", file.display(), root.display())));
    }
    Ok((root, f[r.len()..].join("/")))
}

fn status_json(st: &ServerState) -> serde_json::Value {
    let files: serde_json::Map<String, serde_json::Value> =
        st.files.iter().map(|(p, f)| (p.clone(), json!(f.all_diagnostics().collect::<Vec<_>>()))).collect();
    json!({ "errors": st.report().errors.len(), "files": files })
}

fn apply(st: &mut ServerState, root: &Path, ch: &ChangeSet) -> Result<serde_json::Value, Failure> {
    let fs = load_dir(root)?;
    let rechecked = st.apply_changes(fs, ch).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok(json!({ "rechecked": rechecked, "errors": st.report().errors.len() }))
}

fn run(cmd: Cmd, out: &mut impl Write) -> Result<u8, Failure> {
    match cmd {
        Cmd::Check { root, flags, pretty } => {
            let fs = load_dir(&root)?;
            let r = check_all(&fs, &flags.options()).map_err(|e| Failure::Internal(e.to_string()))?;
            let report = r.report();
            if pretty {
                write!(out, "{}", report.pretty()).map_err(io)?;
            } else {
                writeln!(out, "{}", report.to_json()).map_err(io)?;
            }
            Ok(u8::from(!report.errors.is_empty()))
        }
        Cmd::Server { root, flags, status, apply: change_file } => {
            let fs = load_dir(&root)?;
            let mut st = init_server(fs, flags.options()).map_err(|e| Failure::Internal(e.to_string()))?;
            if status || change_file.is_some() {
                if let Some(path) = change_file {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    let ch: ChangeSet =
                        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                    writeln!(out, "{}", apply(&mut st, &root, &ch)?).map_err(io)?;
                }
                if status {
                    writeln!(out, "{}", status_json(&st)).map_err(io)?;
                }
                return Ok(0);
            }
            for line in std::io::stdin().lock().lines() {
                let line = line.map_err(io)?;
                let line = line.trim();
                let reply = match line {
                    "" => continue,
                    "quit" | "exit" => break,
                    "status" => status_json(&st),
                    _ => match serde_json::from_str::<ChangeSet>(line) {
                        Ok(ch) => apply(&mut st, &root, &ch)?,
                        Err(e) => json!({ "error": e.to_string() }),
                    },
                };
                writeln!(out, "{reply}").map_err(io)?;
                out.flush().map_err(io)?;
            }
            Ok(0)
        }
        Cmd::Eval { file, fuel } => {
            let (root, key) = split_file(&file, None)?;
            let fs = load_dir(&root)?;
            if !fs.contains(&key) {
                return Err(Failure::Usage(format!("{} is not a .fc file", file.display())));
            }
            match run_with_modules(&fs, &key, fuel) {
                Ok(o) => {
                    writeln!(out, "{o}").map_err(io)?;
                    Ok(u8::from(matches!(o, Outcome::Stuck { .. })))
                }
                Err(es) => print_syntax_errors(out, es.iter().map(Diagnostic::from_syntax).collect()),
            }
        }
        Cmd::DumpAst { file } => match load_program(&file)? {
            Ok(p) => {
                writeln!(out, "{}", serde_json::to_string_pretty(&program_json(&p)).expect("json")).map_err(io)?;
                Ok(0)
            }
            Err(ds) => print_syntax_errors(out, ds),
        },
        Cmd::DumpConstraints { file, no_refinements } => match load_program(&file)? {
            Ok(p) => {
                let g = check_program(&p, &GenOptions { refinements: !no_refinements });
                for c in g.log() {
                    writeln!(out, "{c}").map_err(io)?;
                }
                Ok(0)
            }
            Err(ds) => print_syntax_errors(out, ds),
        },
        Cmd::DumpGraph { file, no_refinements } => match load_program(&file)? {
            Ok(p) => {
                let g = check_program(&p, &GenOptions { refinements: !no_refinements });
                write!(out, "{}", dot(&g)).map_err(io)?;
                Ok(0)
            }
            Err(ds) => print_syntax_errors(out, ds),
        },
        Cmd::DumpSignature { file, root } => {
            let (root, key) = split_file(&file, root.as_deref())?;
            let fs = load_dir(&root)?;
            let r = check_all(&fs, &CheckOptions::default()).map_err(|e| Failure::Internal(e.to_string()))?;
            let Some(f) = r.files.get(&key) else {
                return Err(Failure::Usage(format!("{} is not a .fc file", file.display())));
            };
            writeln!(out, "# hash {:016x}", f.signature.hash).map_err(io)?;
            write!(out, "{}", f.signature.text).map_err(io)?;
            Ok(0)
        }
    }
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Classes as nodes, bounds as edges, failing literals in red.
fn dot(g: &Graph) -> String {
    let bad: Vec<_> = g.consistency_errors();
    let mut s = String::from("digraph constraints {\n  node [shape=box, fontname=monospace];\n");
    for (root, members, lowers, uppers) in g.classes() {
        let names: Vec<String> = members.iter().map(|v| v.to_string()).collect();
        s.push_str(&format!("  v{} [label=\"{}\"];\n", root.0, dot_escape(&names.join(" = "))));
        for (i, l) in lowers.iter().enumerate() {
            let failing = bad.iter().any(|b| b.lhs == l.strip());
            let color = if failing { ", color=red, fontcolor=red" } else { "" };
            s.push_str(&format!(
                "  l{}_{i} [label=\"{}\", shape=ellipse{color}];\n",
                root.0,
                dot_escape(&l.to_string())
            ));
            s.push_str(&format!("  l{}_{i} -> v{};\n", root.0, root.0));
        }
        for (i, u) in uppers.iter().enumerate() {
            s.push_str(&format!("  u{}_{i} [label=\"{}\", shape=note];\n", root.0, dot_escape(&u.to_string())));
            s.push_str(&format!("  v{} -> u{}_{i};\n", root.0, root.0));
        }
    }
    for (i, b) in bad.iter().enumerate() {
        s.push_str(&format!(
            "  e{i} [label=\"{}\", shape=octagon, color=red];\n",
            dot_escape(&format!("{} ({})", b, b.reason.code()))
        ));
    }
    s.push_str("}\n");
    s
}
