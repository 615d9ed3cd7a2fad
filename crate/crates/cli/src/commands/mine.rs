use super::{finish, open_graph, path_engine, thread_pool, write_output};
use crate::config::PipelineConfig;
use crate::error::{CliError, ExitKind, OrExit};
use crate::manifest::{RunManifest, StageTimer};
use kgcot_core::entity_linker::build_lexicon;
use kgcot_core::path_engine::serialize_path;
use kgcot_core::qa_forge::read_qa_records;
use kgcot_core::{EntityLinker, Graph, NodeId, PathEngine};
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Default, clap::Args)]
pub struct MineArgs {
    /// Question text; its linked entities are the path anchors.
    #[arg(long, requires = "answer", conflicts_with = "corpus")]
    pub question: Option<String>,
    /// Answer text, linked as a whole.
    #[arg(long)]
    pub answer: Option<String>,
    /// QA corpus (JSONL); mines from each item's head to its answer.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

fn mine_lines(engine: &PathEngine, graph: &Graph, q: &BTreeSet<NodeId>, a: &BTreeSet<NodeId>, max_d: usize) -> Result<Vec<String>, CliError> {
    let mined = engine.mine(graph, q, a, max_d).or_exit(ExitKind::Linking)?;
    if mined.truncated {
        log::warn!("path search hit the result cap; output is a subset");
    }
    Ok(mined.paths.iter().map(|p| serialize_path(p, graph)).collect())
}

/// Writes `<out>/paths.tsv`: one serialized path per line, prefixed by the
/// item id in corpus mode. Returns the file's lines.
pub fn cmd_mine(cfg: &PipelineConfig, args: &MineArgs) -> Result<Vec<String>, CliError> {
    let mut manifest = RunManifest::new("mine", cfg.hash(), cfg.seed);
    let timer = StageTimer::start("mine");
    let (graph, mut inputs) = open_graph(cfg)?;
    let engine = path_engine(cfg)?;
    let max_d = cfg.paths.max_d;

    let lines = match (&args.question, &args.corpus) {
        (Some(question), None) => {
            let lexicon = build_lexicon(&graph);
            let q: BTreeSet<NodeId> = lexicon.link(question).into_iter().flat_map(|r| r.candidates).collect();
            if q.is_empty() {
                return Err(CliError::new(ExitKind::Linking, format!("no entity in {question:?} links to the graph")));
            }
            let answer = args.answer.as_deref().unwrap_or_default();
            let a = lexicon.link_answer(answer);
            if a.is_empty() {
                return Err(CliError::new(ExitKind::Linking, format!("answer {answer:?} does not link to the graph")));
            }
            mine_lines(&engine, &graph, &q, &a, max_d)?
        }
        (None, Some(corpus)) => {
            let records = read_qa_records(corpus).or_exit(ExitKind::Schema)?;
            inputs.push(corpus.clone());
            let lookup = |key: &str, id: &str| {
                graph
                    .node_by_key(key)
                    .ok_or_else(|| CliError::new(ExitKind::Linking, format!("{id}: node {key:?} is not in the graph")))
            };
            let per_item: Vec<Result<Vec<String>, CliError>> = thread_pool(cfg.jobs)?.install(|| {
                records
                    .par_iter()
                    .map(|r| {
                        let q = BTreeSet::from([lookup(&r.head_key, &r.id)?]);
                        let a = BTreeSet::from([lookup(&r.answer_key, &r.id)?]);
                        Ok(mine_lines(&engine, &graph, &q, &a, max_d)?.into_iter().map(|l| format!("{}\t{l}", r.id)).collect())
                    })
                    .collect()
            });
            per_item.into_iter().collect::<Result<Vec<_>, _>>()?.concat()
        }
        _ => return Err(CliError::schema("mine needs either --question with --answer, or --corpus")),
    };

    let out = cfg.out.join("paths.tsv");
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    write_output(&out, text.as_bytes(), ExitKind::Linking)?;
    print!("{text}");
    let ins: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
    manifest.finish_stage(timer, &ins, &[&out]).or_exit(ExitKind::Linking)?;
    finish(&manifest, &cfg.out, ExitKind::Linking)?;
    Ok(lines)
}
