use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crex_core::analysis::{rpy_histogram, top_crs_for_rpy, YearRange};
use crex_core::convert::loss_report;
use crex_core::cre::{load_cre_file, save_cre_file, WorkingState};
use crex_core::matching::SimilarityConfig;
use crex_core::model::{display_details, Dataset, Origin};
use crex_core::scopus::{parse_scopus_csv, write_scopus_csv};
use crex_core::wos::{parse_wos, write_wos, WosInput};
use crex_server::ApiSession;

use crate::{Command, Format};

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Import {
            format,
            files,
            output,
            decisions_from,
        } => import(format, &files, &output, decisions_from.as_deref()),
        Command::Export {
            format,
            state,
            output,
        } => export(format, &state, &output),
        Command::Cluster {
            threshold,
            rpy_slack,
            all_years,
            state,
            output,
        } => {
            let mut session = open(&state)?;
            let mut config = session.state().config;
            if let Some(t) = threshold {
                config.threshold = t;
            }
            if let Some(s) = rpy_slack {
                config.rpy_slack = s;
            }
            if all_years {
                config.same_rpy_only = false;
            }
            let clusters = session.recluster(config)?;
            eprintln!("{clusters} cluster(s) with more than one reference");
            store(&session, output.as_deref())
        }
        Command::Decide {
            a,
            b,
            verdict,
            state,
        } => {
            let mut session = open(&state)?;
            let affected = session.record_decision(a, b, verdict)?;
            for c in affected {
                let ids: Vec<String> = c.iter().map(ToString::to_string).collect();
                eprintln!("cluster: {}", ids.join(" "));
            }
            store(&session, None)
        }
        Command::Merge { state, output } => {
            let mut session = open(&state)?;
            let s = session.merge();
            eprintln!(
                "merged {} reference(s): {} -> {}, {} occurrences",
                s.merged, s.crs_before, s.crs_after, s.total_n_cr
            );
            store(&session, output.as_deref())
        }
        Command::Rpys { state, output } => {
            let st = load(&state)?;
            let spectrum = rpy_histogram(&st.dataset);
            if spectrum.missing_rpy > 0 {
                log::info!("{} occurrence(s) without a year", spectrum.missing_rpy);
            }
            emit(&spectrum.to_csv(), output.as_deref())
        }
        Command::Top { rpy, k, state } => {
            let st = load(&state)?;
            let top = top_crs_for_rpy(&st.dataset, rpy, k)?;
            let mut out = String::from("id\tn_cr\tcited reference\n");
            for cr in top {
                out.push_str(&format!("{}\t{}\t{}\n", cr.id, cr.n_cr, cr.raw));
            }
            emit(&out, None)
        }
        Command::RemoveYear {
            from,
            to,
            drop_missing,
            state,
            output,
        } => {
            let range = YearRange::new(from, to)?;
            let mut session = open(&state)?;
            let s = session.remove_years(range, !drop_missing)?;
            eprintln!(
                "removed {} reference(s), {} occurrence(s); {} left",
                s.removed_crs, s.removed_slots, s.crs_after
            );
            store(&session, output.as_deref())
        }
        Command::Details { cr, state } => {
            let session = open(&state)?;
            session.check_live(cr)?;
            let mut out = String::new();
            for (label, value) in display_details(&session.state().dataset.crs[&cr]) {
                out.push_str(&format!("{label}: {value}\n"));
            }
            emit(&out, None)
        }
        Command::Serve {
            state,
            port,
            assets,
        } => {
            let session = open(&state)?;
            let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
            eprintln!("listening on http://127.0.0.1:{port}");
            rt.block_on(crex_server::serve(session, port, assets))
                .context("server failed")
        }
    }
}

fn load(path: &Path) -> Result<WorkingState> {
    load_cre_file(path).with_context(|| format!("reading {}", path.display()))
}

fn open(path: &Path) -> Result<ApiSession> {
    ApiSession::open(path).with_context(|| format!("reading {}", path.display()))
}

/// Writes the session to `output`, or back over its own file.
fn store(session: &ApiSession, output: Option<&Path>) -> Result<()> {
    let path = output.unwrap_or(session.state_path());
    save_cre_file(session.state(), path).with_context(|| format!("writing {}", path.display()))
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn import(
    format: Format,
    files: &[PathBuf],
    output: &Path,
    decisions_from: Option<&Path>,
) -> Result<()> {
    let mut inputs = Vec::with_capacity(files.len());
    for f in files {
        let bytes = fs::read(f).with_context(|| format!("reading {}", f.display()))?;
        inputs.push((f.display().to_string(), bytes));
    }
    let dataset = match format {
        Format::Wos => {
            let inputs: Vec<WosInput> = inputs
                .into_iter()
                .map(|(name, bytes)| WosInput::new(name, bytes))
                .collect();
            parse_wos(&inputs)?
        }
        Format::Scopus => {
            let mut parts = Vec::new();
            for (name, bytes) in &inputs {
                let import =
                    parse_scopus_csv(name, bytes).with_context(|| format!("parsing {name}"))?;
                for e in &import.row_errors {
                    log::warn!("{name}: row {}: {}", e.row, e.message);
                }
                parts.push(import.dataset);
            }
            Dataset::combine(parts)
        }
    };
    let config = SimilarityConfig::default();
    let mut state = WorkingState::new(dataset, config);
    if let Some(prev) = decisions_from {
        let prev = load(prev)?;
        let carried = state.carry_decisions_from(&prev);
        eprintln!("carried {carried} decision(s)");
    }
    eprintln!(
        "{} publication(s), {} cited reference(s), {} occurrence(s)",
        state.dataset.publications.len(),
        state.dataset.crs.len(),
        state.dataset.total_n_cr()
    );
    save_cre_file(&state, output).with_context(|| format!("writing {}", output.display()))
}

fn export(format: Format, state: &Path, output: &Path) -> Result<()> {
    let st = load(state)?;
    let (target, text) = match format {
        Format::Wos => (Origin::Wos, write_wos(&st.dataset)),
        Format::Scopus => (Origin::Scopus, write_scopus_csv(&st.dataset)),
    };
    let report = loss_report(&st.dataset, target);
    if !report.is_lossless() {
        eprint!("{report}");
    }
    fs::write(output, text).with_context(|| format!("writing {}", output.display()))
}
