use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use guidetwig_core::Index;
use tempfile::TempDir;

fn guidetwig(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_guidetwig")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `xml` and indexes it; returns the index path.
fn indexed(dir: &TempDir, xml: &str) -> PathBuf {
    let (src, idx) = (path(dir, "doc.xml"), path(dir, "doc.idx"));
    std::fs::write(&src, xml).unwrap();
    let o = guidetwig(&["index", s(&src), s(&idx)]);
    assert!(o.status.success(), "{}", stderr(&o));
    idx
}

fn generated_index(dir: &TempDir, seed: &str, nodes: &str) -> PathBuf {
    let (xml, idx) = (path(dir, "gen.xml"), path(dir, "gen.idx"));
    assert!(guidetwig(&["gen", "--seed", seed, "--nodes", nodes, "-o", s(&xml)]).status.success());
    assert!(guidetwig(&["index", s(&xml), s(&idx)]).status.success());
    idx
}

const SAMPLE: &str = "<R><A><B/><C/></A><X><B/><C/></X><A><C/><B/><A><B/><C/></A></A></R>";

#[test]
fn index_round_trips_a_tiny_document() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, "<A><B/><C/></A>");
    let loaded = Index::load(&idx).unwrap();
    assert_eq!(loaded, Index::from_xml_bytes(b"<A><B/><C/></A>").unwrap());
    assert_eq!(loaded.element_count(), 3);
    assert_eq!(loaded.to_bytes(), std::fs::read(&idx).unwrap());
}

#[test]
fn corrupted_index_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    let mut bytes = std::fs::read(&idx).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    std::fs::write(&idx, bytes).unwrap();
    let o = guidetwig(&["query", s(&idx), "//A/B"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("checksum"), "{}", stderr(&o));
}

#[test]
fn generated_count_matches_index() {
    let dir = TempDir::new().unwrap();
    let xml = path(&dir, "g.xml");
    let o = guidetwig(&["gen", "--seed", "42", "-o", s(&xml)]);
    assert!(o.status.success());
    let emitted: usize = stderr(&o).split_whitespace().nth(1).unwrap().parse().unwrap();
    let idx = path(&dir, "g.idx");
    guidetwig(&["index", s(&xml), s(&idx)]);
    assert_eq!(Index::load(&idx).unwrap().element_count(), emitted);
}

#[test]
fn generation_is_repeatable_and_bounded() {
    let a = guidetwig(&["gen", "--seed", "9", "--nodes", "3000"]);
    let b = guidetwig(&["gen", "--seed", "9", "--nodes", "3000"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let one = guidetwig(&["gen", "--max-depth", "1", "--seed", "5"]);
    let xml = stdout(&one);
    assert_eq!(Index::from_xml_bytes(xml.as_bytes()).unwrap().element_count(), 1);
}

#[test]
fn counts_and_empty_results() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    let o = guidetwig(&["query", s(&idx), "//A[.//B]//C//D", "--count"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "0\n");
    let o = guidetwig(&["query", s(&idx), "//A[./B]/C", "--format", "count"]);
    assert_eq!(stdout(&o), "3\n");
    let o = guidetwig(&["query", s(&idx), "//A[./B]/C", "--project", "jp"]);
    assert_eq!(stdout(&o), "1\n3\n3.3\n");
}

#[test]
fn metrics_line_on_stderr() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    let o = guidetwig(&["query", s(&idx), "//A/B"]);
    let line = stderr(&o);
    let fields: Vec<&str> = line.trim_end().split(", ").collect();
    assert_eq!(fields.len(), 3, "{line}");
    for (field, key) in fields.iter().zip(["nodes_read", "bytes_scanned", "micros"]) {
        let (k, v) = field.split_once('=').unwrap();
        assert_eq!(k, key);
        v.parse::<u64>().unwrap();
    }
    assert!(line.starts_with("nodes_read=3, bytes_scanned=7, "), "{line}");
}

#[test]
fn engines_print_identical_answers() {
    let dir = TempDir::new().unwrap();
    let idx = generated_index(&dir, "3", "4000");
    for q in ["//A[./B]//C", "//*[.//A][./C]/D", "/A//B", "//B[./C[./D]/E]//F"] {
        let dt = guidetwig(&["query", s(&idx), q, "--engine", "dt"]);
        let naive = guidetwig(&["query", s(&idx), q, "--engine", "naive"]);
        let scan = guidetwig(&["query", s(&idx), q, "--engine", "leafscan"]);
        assert!(dt.status.success());
        assert_eq!(dt.stdout, naive.stdout, "{q}");
        assert_eq!(dt.stdout, scan.stdout, "{q}");
    }
}

#[test]
fn explain_output() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    let o = guidetwig(&["query", s(&idx), "//A/B", "--explain"]);
    let text = stdout(&o);
    assert!(text.contains("no DT required"), "{text}");
    assert!(text.contains("prefix_comparisons=0"), "{text}");
    let o = guidetwig(&["query", s(&idx), "//A[./B]/C", "--explain"]);
    let text = stdout(&o);
    assert!(text.starts_with("DT"), "{text}");
    assert!(!text.contains("no DT required"));
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    assert_eq!(guidetwig(&[]).status.code(), Some(1));
    assert_eq!(guidetwig(&["--help"]).status.code(), Some(0));
    assert_eq!(guidetwig(&["query", s(&idx), "//A[./B"]).status.code(), Some(1));
    assert_eq!(guidetwig(&["query", s(&idx), "//A", "--engine", "sax"]).status.code(), Some(1));
    assert_eq!(guidetwig(&["query", "/no/such/file", "//A"]).status.code(), Some(2));
    assert_eq!(guidetwig(&["gen", "--max-fanout", "0"]).status.code(), Some(1));
    let bad_xml = path(&dir, "bad.xml");
    std::fs::write(&bad_xml, "<A><B></A>").unwrap();
    let o = guidetwig(&["index", s(&bad_xml), s(&path(&dir, "bad.idx"))]);
    assert_eq!(o.status.code(), Some(2));
    let workload = path(&dir, "w.txt");
    std::fs::write(&workload, "ok\t//A\nbroken\t//A[\n").unwrap();
    let o = guidetwig(&["bench", s(&idx), "--workload", s(&workload)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));
}

#[test]
fn bench_from_workload_file() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    let workload = path(&dir, "w.txt");
    std::fs::write(&workload, "# two queries\nfirst\t//A/B\n//A[./B]/C\n").unwrap();
    let o = guidetwig(&["bench", s(&idx), "--workload", s(&workload), "--engine", "dt", "--engine", "naive"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(String::from).collect();
    assert_eq!(lines[0], "query_name,query,engine,results,nodes_read,bytes_scanned,micros");
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("first,//A/B,dt,3,"), "{}", lines[1]);
    assert!(lines[4].starts_with("Q2,//A[./B]/C,naive,3,"), "{}", lines[4]);
}

#[test]
fn auto_sweeps_need_a_deep_document() {
    let dir = TempDir::new().unwrap();
    let idx = indexed(&dir, SAMPLE);
    let o = guidetwig(&["bench", s(&idx), "--auto", "single-branch"]);
    assert_eq!(o.status.code(), Some(2));
}
