//! Subprocess tests for the `ucap` binary: exit codes, diagnostics,
//! tracing, and memory dumps.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ucap"))
}

/// A scratch directory unique to one test.
fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ucap-cli-{}-{tag}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_source(dir: &PathBuf, name: &str, source: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, source).unwrap();
    path
}

/// Assembles `source` and returns the image path, asserting success.
fn assemble(dir: &PathBuf, source: &str) -> PathBuf {
    let src = write_source(dir, "prog.s", source);
    let img = dir.join("prog.img");
    let out = bin().arg("asm").arg(&src).arg("-o").arg(&img).output().unwrap();
    assert!(out.status.success(), "asm failed: {}", stderr(&out));
    img
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn assemble_and_run_round_trip() {
    let dir = workdir("round-trip");
    let img = assemble(&dir, "li r2, 7\nhalt\n");
    let out = bin().arg("run").arg(&img).output().unwrap();
    assert_eq!(out.status.code(), Some(7));
    assert!(stderr(&out).contains("halted with code 7"));
}

#[test]
fn diagnostics_exit_with_one_and_name_the_location() {
    let dir = workdir("diagnostics");
    let src = write_source(&dir, "bad.s", "li r3, 1\ncld r4, 0(r3)\n");
    let out = bin().arg("asm").arg(&src).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = stderr(&out);
    assert!(err.contains("bad.s:2:"), "no location in: {err}");
    assert!(err.contains("memory base must be a capability register"));
    assert!(!dir.join("bad.img").exists());
}

#[test]
fn missing_input_exits_with_two() {
    let out = bin().arg("asm").arg("/nonexistent/prog.s").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_image_exits_with_two() {
    let dir = workdir("invalid-image");
    let img = dir.join("garbage.img");
    fs::write(&img, b"not an image").unwrap();
    let out = bin().arg("run").arg(&img).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("not a program image"));
}

#[test]
fn trap_exit_code_and_detail() {
    let dir = workdir("trap");
    let img = assemble(&dir, "cuninit c3, c2\ncld r4, -1(c3)\nhalt\n");
    let out = bin().arg("run").arg(&img).output().unwrap();
    assert_eq!(out.status.code(), Some(12), "stderr: {}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("UninitRead"), "trap name missing: {err}");
    assert!(err.contains("pc=0x8"), "trap pc missing: {err}");
    assert!(err.contains("0xfff8"), "faulting address missing: {err}");
}

#[test]
fn step_limit_exits_with_nine() {
    let dir = workdir("step-limit");
    let img = assemble(&dir, "spin: j spin\n");
    let out = bin().arg("run").arg(&img).arg("--max-steps").arg("10").output().unwrap();
    assert_eq!(out.status.code(), Some(9));
    assert!(stderr(&out).contains("step limit"));
}

#[test]
fn trace_prints_one_line_per_step() {
    let dir = workdir("trace");
    let img = assemble(&dir, "li r3, 7\nhalt\n");
    let out = bin().arg("run").arg(&img).arg("--trace").output().unwrap();
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().map(str::trim_end).collect();
    assert_eq!(
        lines,
        [
            "step0 pc=0x0 op=li rd=3 rs1=0 rs2=0 imm=7 | effect=r3=0x7",
            "step1 pc=0x8 op=halt rd=0 rs1=0 rs2=0 imm=0 | effect=HALT(0)",
        ]
    );
}

#[test]
fn dump_flag_prints_final_memory_lines() {
    let dir = workdir("dump-flag");
    let img = assemble(&dir, "li r3, 0xAB\ncsd r3, 0(c1)\nhalt\n.data 0x4000\n.word 0\n");
    let out = bin()
        .arg("run")
        .arg(&img)
        .arg("--dump")
        .arg("0x4000:0x4020")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(
        text.starts_with("00004000  ab 00 00 00 00 00 00 00"),
        "unexpected dump: {text}"
    );
    assert!(text.trim_end().ends_with('.'), "tag column missing: {text}");
}

#[test]
fn bad_dump_range_exits_with_two() {
    let dir = workdir("bad-range");
    let img = assemble(&dir, "halt\n");
    let out = bin().arg("run").arg(&img).arg("--dump").arg("10-20").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bad --dump range"));
}

#[test]
fn mem_size_must_be_line_aligned() {
    let dir = workdir("mem-size");
    let img = assemble(&dir, "halt\n");
    let out = bin().arg("run").arg(&img).arg("--mem-size").arg("100").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("multiple of 32"));
}

#[test]
fn dump_subcommand_lists_image_contents() {
    let dir = workdir("dump-image");
    let img = assemble(
        &dir,
        ".entry main\nmain: li r2, 1\nhalt\nfini:\n.data 0x4000\n.word 0xFF\n.space 24\n.cap RX, 0, fini, main\n",
    );
    let out = bin().arg("dump").arg(&img).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("entry    0x0"), "{text}");
    assert!(text.contains("code     0x0..0x10  (2 instructions)"), "{text}");
    assert!(text.contains("stack    0x8000..0x10000"), "{text}");
    assert!(text.contains("data     2 entries"), "{text}");
    assert!(text.contains("0x4000  8 bytes: ff 00 00 00 00 00 00 00"), "{text}");
    assert!(text.contains("(RX base=0x0 end=0x10 cursor=0x0)"), "{text}");
    assert!(text.contains("0x0  li r2, 1"), "{text}");
    assert!(text.contains("0x8  halt"), "{text}");
}

#[test]
fn run_reuses_the_scenario_corpus() {
    // The adversarial fixtures drive the binary exactly as documented:
    // exit code 12 for the stale-read scenario.
    let dir = workdir("scenario");
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios/s2_stale_read.s");
    let src = dir.join("s2.s");
    fs::copy(&fixture, &src).unwrap();
    let img = dir.join("s2.img");
    let out = bin().arg("asm").arg(&src).arg("-o").arg(&img).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let out = bin().arg("run").arg(&img).output().unwrap();
    assert_eq!(out.status.code(), Some(12), "stderr: {}", stderr(&out));
}
