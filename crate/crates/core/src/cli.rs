//! The `opfactor` command line.
//!
//! Every factoring command writes a bundle and derives its certificates
//! from the payloads it has just written, through the same code path that
//! `verify` uses.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::bundle::{read_bundle, sha256_hex, write_bundle, Certificates, Check, InputRef, Manifest, Payloads, VERIFY_TOL};
use crate::decompose::{canonical_form, CanonicalBlocks, CanonicalOptions};
use crate::error::{Error, Result};
use crate::family::{generate, FamilyDescriptor, FamilyKind};
use crate::linalg::{assemble, fro, kernel_basis, max_abs, norm2, pad_with_zero, svd, zeros, Matrix, SubspaceBasis};
use crate::mtx;
use crate::nil::{
    common_nilpotent_sandwich, common_nilpotent_two_sided, cube_ratio, factor_two_nilpotents, nilpotency_index,
    relative_residual, NilOptions, DEFAULT_NIL_TOL,
};
use crate::qn::{
    common_factor_general, common_left_factor_compact, common_right_factor_compact, factor_quasinilpotent,
    two_sided_compact, FactorSide, GeneralOptions, QnOptions, ShiftFactorization,
};

pub const EXIT_OK: i32 = 0;
/// A certificate failed or an internal routine did not converge.
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_OBSTRUCTION: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

pub fn exit_code(e: &Error) -> i32 {
    use Error::*;
    match e {
        Infeasible(_)
        | KernelEmpty
        | BudgetExceeded { .. }
        | NotEssentiallySingular { .. }
        | RangeInclusionFailed { .. }
        | DegenerateReduction { .. }
        | EmptyComplement { .. } => EXIT_INFEASIBLE,
        Parse { .. }
        | InvalidDescriptor(_)
        | Io(_)
        | Json(_)
        | ShapeMismatch(_)
        | NonFinite { .. }
        | SpaceTooSmall { .. }
        | SplitTooShallow { .. } => EXIT_CONFIG,
        SemiFredholmObstruction { .. } => EXIT_OBSTRUCTION,
        Bundle(_) => EXIT_MISMATCH,
        ConvergenceFailure { .. } | InfiniteFiber { .. } | NotTriangular { .. } => EXIT_FAILED,
    }
}

#[derive(Parser)]
#[command(name = "opfactor", version, about = "Nilpotent and quasi-nilpotent factorizations with verifiable certificate bundles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Factor T ⊕ 0 = M·N with M³ = N³ = 0.
    FactorNilpotent(NilArgs),
    /// Canonical form followed by a product of two quasi-nilpotent block operators.
    FactorQn(QnArgs),
    /// Common factors for a family of matrices of one size.
    CommonFactor(CommonArgs),
    /// Recompute every certificate of a bundle from its payloads.
    Verify { bundle: PathBuf },
    /// Write a seeded test family as Matrix Market files.
    Generate(GenArgs),
}

#[derive(Args)]
struct NilArgs {
    input: PathBuf,
    #[arg(long, default_value = "bundle")]
    out: PathBuf,
    /// Fail instead of appending zero coordinates.
    #[arg(long)]
    no_pad: bool,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_NIL_TOL)]
    tol: f64,
}

impl NilArgs {
    fn options(&self) -> NilOptions {
        nil_options(self.tol, self.no_pad, self.budget)
    }
}

fn nil_options(tol: f64, no_pad: bool, budget: Option<usize>) -> NilOptions {
    NilOptions { tol, budget: if no_pad { Some(0) } else { budget } }
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "family"])))]
struct QnArgs {
    input: Option<PathBuf>,
    /// JSON family descriptor instead of an input matrix.
    #[arg(long)]
    family: Option<PathBuf>,
    #[arg(long, default_value = "bundle")]
    out: PathBuf,
    #[arg(long, default_value_t = 6)]
    window: u64,
    #[arg(long, default_value_t = 4.0)]
    base: f64,
    #[arg(long, default_value_t = 6)]
    pieces: usize,
    #[arg(long, default_value_t = 2.0)]
    scale: f64,
    #[arg(long, default_value_t = 10)]
    n_max: usize,
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Almost-null pairs drawn for the canonical form.
    #[arg(long, default_value_t = 4)]
    count: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    CompactRight,
    CompactLeft,
    CompactTwoSided,
    General,
    NilpotentSandwich,
    NilpotentTwoSided,
}

#[derive(Args)]
struct CommonArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value = "bundle")]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    n_max: usize,
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value_t = DEFAULT_NIL_TOL)]
    tol: f64,
    #[arg(long)]
    no_pad: bool,
    #[arg(long)]
    budget: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: FamilyKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long)]
    kernel_dim: Option<usize>,
    #[arg(long)]
    structured: bool,
    /// A `.mtx` file for a single matrix, otherwise a directory.
    #[arg(long)]
    out: PathBuf,
}

/// Runs the command line and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::FactorNilpotent(a) => cmd_factor_nilpotent(&a),
        Command::FactorQn(a) => cmd_factor_qn(&a),
        Command::CommonFactor(a) => cmd_common_factor(&a),
        Command::Verify { bundle } => cmd_verify(&bundle),
        Command::Generate(a) => cmd_generate(&a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("opfactor: {e}");
            exit_code(&e)
        }
    }
}

fn configure_threads() {
    let Ok(v) = std::env::var("OPFACTOR_MAX_THREADS") else { return };
    match v.parse::<usize>() {
        Ok(n) if n > 0 => {
            // a second call in one process keeps the first pool
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        _ => eprintln!("opfactor: ignoring OPFACTOR_MAX_THREADS={v}"),
    }
}

fn read_input(path: &Path) -> Result<(Matrix, InputRef)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse { line: 0, msg: "input is not UTF-8".into() })?;
    let m = mtx::parse(&text)?;
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok((m, InputRef { path: name, sha256: sha256_hex(text.as_bytes()) }))
}

fn read_inputs(paths: &[PathBuf]) -> Result<(Vec<Matrix>, Vec<InputRef>)> {
    let (ms, refs): (Vec<_>, Vec<_>) = paths.iter().map(|p| read_input(p)).collect::<Result<Vec<_>>>()?.into_iter().unzip();
    if ms.iter().any(|m| m.shape() != ms[0].shape()) {
        return Err(Error::ShapeMismatch("inputs differ in shape".into()));
    }
    Ok((ms, refs))
}

fn tolerances(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn finish(out: &Path, mut manifest: Manifest, payloads: Payloads) -> Result<i32> {
    let certs = certify(&manifest, &payloads)?;
    write_bundle(out, &mut manifest, &certs, &payloads)?;
    for c in certs.failures() {
        eprintln!("opfactor: check {} failed: {:e} against {:?}", c.name, c.value, c.limit);
    }
    println!(
        "{}: {} checks, {}",
        out.display(),
        certs.checks.len(),
        if certs.all_pass { "all pass" } else { "some failed" }
    );
    Ok(if certs.all_pass { EXIT_OK } else { EXIT_FAILED })
}

const NIL_RESIDUAL: f64 = 1e-10;
const CUBE: f64 = 1e-12;
const GENERAL_RESIDUAL: f64 = 1e-8;
const CANONICAL_RESIDUAL: f64 = 1e-8;
const COMPACT_RESIDUAL: f64 = 1e-10;
const STACKED_DIAGNOSTIC: f64 = 1e-2;

fn cmd_factor_nilpotent(a: &NilArgs) -> Result<i32> {
    let (t, input) = read_input(&a.input)?;
    let opts = a.options();
    let f = factor_two_nilpotents(&t, &opts)?;
    let params = json!({ "options": opts, "padding": f.decomposition.padding });
    let mut manifest = Manifest::new(
        "factor-nilpotent",
        params,
        tolerances(&[("kernel", opts.tol), ("residual", NIL_RESIDUAL), ("cube", CUBE), ("verify", VERIFY_TOL)]),
    );
    manifest.inputs.push(input);
    let mut p = Payloads::new();
    p.insert("t".into(), t);
    p.insert("m".into(), f.m);
    p.insert("n".into(), f.n);
    p.insert("w".into(), f.decomposition.unitary());
    finish(&a.out, manifest, p)
}

fn blocks_into(p: &mut Payloads, prefix: &str, b: &CanonicalBlocks) {
    for (name, m) in [("a", &b.a), ("b", &b.b), ("k", &b.k), ("c", &b.c), ("d", &b.d), ("l", &b.l)] {
        p.insert(format!("{prefix}{name}"), m.clone());
    }
}

fn cmd_factor_qn(a: &QnArgs) -> Result<i32> {
    let qn = QnOptions {
        pieces: a.pieces,
        base: a.base,
        scale: a.scale,
        window: a.window,
        n_max: a.n_max,
        threshold: a.threshold,
    };
    let copts = CanonicalOptions { count: a.count, ..Default::default() };
    let mut p = Payloads::new();
    let mut inputs = Vec::new();
    let (members, source) = if let Some(path) = &a.family {
        let text = std::fs::read_to_string(path)?;
        let desc: FamilyDescriptor = serde_json::from_str(&text).map_err(|e| Error::InvalidDescriptor(e.to_string()))?;
        inputs.push(InputRef { path: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(), sha256: sha256_hex(text.as_bytes()) });
        let fam = generate(&desc)?;
        match fam.canonical {
            Some(blocks) => {
                for (i, b) in blocks.iter().enumerate() {
                    blocks_into(&mut p, &format!("m{i}_"), b);
                }
                (blocks.len(), json!({ "family": desc }))
            }
            None => {
                for (i, t) in fam.matrices.iter().enumerate() {
                    canonical_into(&mut p, i, t, &copts)?;
                }
                (fam.matrices.len(), json!({ "family": desc }))
            }
        }
    } else {
        let (t, input) = read_input(a.input.as_ref().expect("clap enforces a source"))?;
        inputs.push(input);
        canonical_into(&mut p, 0, &t, &copts)?;
        (1, json!("matrix"))
    };
    for i in 0..members {
        let pre = format!("m{i}_");
        let f = factor_quasinilpotent(&blocks_from(&p, &pre)?, &qn)?;
        for (n, (((ka, kk), kl), kd)) in f.pieces.a.iter().zip(&f.pieces.k).zip(&f.pieces.l).zip(&f.pieces.d).enumerate() {
            p.insert(format!("{pre}piece{}_a", n + 1), ka.clone());
            p.insert(format!("{pre}piece{}_k", n + 1), kk.clone());
            p.insert(format!("{pre}piece{}_l", n + 1), kl.clone());
            p.insert(format!("{pre}piece{}_d", n + 1), kd.clone());
        }
    }
    let params = json!({ "qn": qn, "canonical": copts, "members": members, "source": source });
    let mut manifest = Manifest::new(
        "factor-qn",
        params,
        tolerances(&[
            ("product", 1e-10),
            ("canonical", CANONICAL_RESIDUAL),
            ("bound", 1e-9),
            ("threshold", a.threshold),
            ("verify", VERIFY_TOL),
        ]),
    );
    manifest.inputs = inputs;
    finish(&a.out, manifest, p)
}

fn canonical_into(p: &mut Payloads, i: usize, t: &Matrix, copts: &CanonicalOptions) -> Result<()> {
    let cf = canonical_form(t, copts)?;
    let pre = format!("m{i}_");
    p.insert(format!("{pre}t"), t.clone());
    p.insert(format!("{pre}v"), cf.basis_change);
    p.insert(format!("{pre}v_inv"), cf.inverse);
    blocks_into(p, &pre, &cf.blocks);
    Ok(())
}

fn cmd_common_factor(a: &CommonArgs) -> Result<i32> {
    let (ts, inputs) = read_inputs(&a.inputs)?;
    let mut p = Payloads::new();
    for (i, t) in ts.iter().enumerate() {
        p.insert(format!("t{i}"), t.clone());
    }
    let nil = nil_options(a.tol, a.no_pad, a.budget);
    let general = GeneralOptions { canonical: CanonicalOptions { count: a.count, ..Default::default() }, n_max: a.n_max, ..Default::default() };
    match a.mode {
        Mode::CompactRight | Mode::CompactLeft => {
            let f = if a.mode == Mode::CompactRight { common_right_factor_compact(&ts)? } else { common_left_factor_compact(&ts)? };
            shift_into(&mut p, "", &f);
            for (i, l) in f.cofactors.iter().enumerate() {
                p.insert(format!("l{i}"), l.clone());
            }
        }
        Mode::CompactTwoSided => {
            let f = two_sided_compact(&ts)?;
            shift_into(&mut p, "left_", &f.left);
            shift_into(&mut p, "right_", &f.right);
            for (i, l) in f.cofactors.iter().enumerate() {
                p.insert(format!("l{i}"), l.clone());
            }
        }
        Mode::General => {
            let f = common_factor_general(&ts, &general)?;
            p.insert("v".into(), f.v);
            p.insert("v_inv".into(), f.v_inv);
            p.insert("q1p".into(), f.q1_prime);
            p.insert("q2p".into(), f.q2_prime);
            for (i, s) in f.s_prime.iter().enumerate() {
                p.insert(format!("s{i}"), s.clone());
            }
            shift_into(&mut p, "r_", &f.r_factor);
            shift_into(&mut p, "q_", &f.q_factor);
        }
        Mode::NilpotentSandwich => {
            let f = common_nilpotent_sandwich(&ts, &nil)?;
            p.insert("n".into(), f.n);
            for (i, m) in f.inner.iter().enumerate() {
                p.insert(format!("n{i}"), m.clone());
            }
        }
        Mode::NilpotentTwoSided => {
            let f = common_nilpotent_two_sided(&ts, &nil)?;
            p.insert("n1".into(), f.n1);
            p.insert("n2".into(), f.n2);
            for (i, m) in f.inner.iter().enumerate() {
                p.insert(format!("s{i}"), m.clone());
            }
        }
    }
    let params = json!({ "mode": a.mode, "members": ts.len(), "nil": nil, "general": general });
    let mut manifest = Manifest::new(
        "common-factor",
        params,
        tolerances(&[
            ("compact", COMPACT_RESIDUAL),
            ("general", GENERAL_RESIDUAL),
            ("nilpotent", NIL_RESIDUAL),
            ("cube", CUBE),
            ("stacked_diagnostic", STACKED_DIAGNOSTIC),
            ("verify", VERIFY_TOL),
        ]),
    );
    manifest.inputs = inputs;
    finish(&a.out, manifest, p)
}

fn shift_into(p: &mut Payloads, prefix: &str, f: &ShiftFactorization) {
    p.insert(format!("{prefix}q"), f.q.clone());
    p.insert(format!("{prefix}basis"), f.basis.matrix().clone());
    let w = Matrix::from_iterator(f.weights.len(), 1, f.weights.iter().map(|w| crate::linalg::c(*w, 0.0)));
    p.insert(format!("{prefix}weights"), w);
}

fn cmd_verify(dir: &Path) -> Result<i32> {
    let (manifest, stored, payloads) = match read_bundle(dir) {
        Ok(b) => b,
        Err(e @ Error::Bundle(_)) => return Err(e),
        Err(Error::Parse { line, msg }) => return Err(Error::Bundle(format!("payload parse error at line {line}: {msg}"))),
        Err(e) => return Err(e),
    };
    let recomputed = certify(&manifest, &payloads).map_err(|e| Error::Bundle(format!("recomputation failed: {e}")))?;
    if let Some(what) = stored.first_divergence(&recomputed, VERIFY_TOL) {
        eprintln!("opfactor: certificate mismatch: {what}");
        return Ok(EXIT_MISMATCH);
    }
    println!("{}: {} checks reproduced", dir.display(), stored.checks.len());
    Ok(EXIT_OK)
}

fn cmd_generate(a: &GenArgs) -> Result<i32> {
    let desc = FamilyDescriptor {
        kind: a.kind,
        n: a.n,
        decay: a.decay,
        seed: a.seed,
        count: a.count,
        kernel_dim: a.kernel_dim,
        structured: a.structured,
    };
    let fam = generate(&desc)?;
    if fam.matrices.len() == 1 && a.out.extension().is_some_and(|e| e == "mtx") {
        mtx::write(&a.out, &fam.matrices[0])?;
    } else {
        std::fs::create_dir_all(&a.out)?;
        for (i, m) in fam.matrices.iter().enumerate() {
            mtx::write(a.out.join(format!("member_{i}.mtx")), m)?;
        }
        std::fs::write(a.out.join("descriptor.json"), serde_json::to_string_pretty(&desc)?)?;
    }
    Ok(EXIT_OK)
}

fn get<'a>(p: &'a Payloads, name: &str) -> Result<&'a Matrix> {
    p.get(name).ok_or_else(|| Error::Bundle(format!("missing payload {name}")))
}

fn param<T: serde::de::DeserializeOwned>(v: &Value, key: &str) -> Result<T> {
    serde_json::from_value(v.get(key).cloned().ok_or_else(|| Error::Bundle(format!("missing parameter {key}")))?)
        .map_err(|e| Error::Bundle(format!("parameter {key}: {e}")))
}

fn blocks_from(p: &Payloads, prefix: &str) -> Result<CanonicalBlocks> {
    let g = |n: &str| get(p, &format!("{prefix}{n}")).cloned();
    let a = g("a")?;
    Ok(CanonicalBlocks { corner: zeros(g("l")?.nrows(), a.nrows()), a, b: g("b")?, k: g("k")?, c: g("c")?, d: g("d")?, l: g("l")? })
}

/// Certificates for a bundle, computed from the manifest parameters and the
/// payloads only.
pub fn certify(manifest: &Manifest, p: &Payloads) -> Result<Certificates> {
    let mut certs = Certificates::default();
    let params = &manifest.parameters;
    match manifest.command.as_str() {
        "factor-nilpotent" => certify_nil_pair(&mut certs, p)?,
        "factor-qn" => {
            let qn: QnOptions = param(params, "qn")?;
            let members: usize = param(params, "members")?;
            for i in 0..members {
                certify_qn_member(&mut certs, p, i, &qn)?;
            }
        }
        "common-factor" => {
            let mode: Mode = param(params, "mode")?;
            let members: usize = param(params, "members")?;
            let ts: Vec<Matrix> = (0..members).map(|i| get(p, &format!("t{i}")).cloned()).collect::<Result<_>>()?;
            match mode {
                Mode::CompactRight => certify_compact(&mut certs, p, &ts, FactorSide::Right, params)?,
                Mode::CompactLeft => certify_compact(&mut certs, p, &ts, FactorSide::Left, params)?,
                Mode::CompactTwoSided => certify_two_sided(&mut certs, p, &ts, params)?,
                Mode::General => certify_general(&mut certs, p, &ts, params)?,
                Mode::NilpotentSandwich => certify_sandwich(&mut certs, p, &ts)?,
                Mode::NilpotentTwoSided => certify_nil_two_sided(&mut certs, p, &ts)?,
            }
        }
        other => return Err(Error::Bundle(format!("unknown command {other}"))),
    }
    Ok(certs.finish())
}

fn index_value(x: &Matrix) -> f64 {
    nilpotency_index(x).map_or(f64::MAX, |k| k as f64)
}

fn nil_factor_checks(certs: &mut Certificates, name: &str, x: &Matrix) {
    certs.push(Check::at_most(format!("{name}.cube"), cube_ratio(x), CUBE));
    certs.push(Check::at_most(format!("{name}.index"), index_value(x), 3.0));
}

fn padded_target(t: &Matrix, size: usize) -> Result<Matrix> {
    let pad = size.checked_sub(t.nrows()).ok_or_else(|| Error::Bundle("factor smaller than input".into()))?;
    Ok(pad_with_zero(t, pad))
}

fn certify_nil_pair(certs: &mut Certificates, p: &Payloads) -> Result<()> {
    let (t, m, n) = (get(p, "t")?, get(p, "m")?, get(p, "n")?);
    let target = padded_target(t, m.nrows())?;
    let mn = m * n;
    certs.push(Check::at_most("residual", relative_residual(&mn, &target), NIL_RESIDUAL));
    nil_factor_checks(certs, "m", m);
    nil_factor_checks(certs, "n", n);
    let part = (m.nrows() / 3) as f64;
    let ker = kernel_basis(&mn, DEFAULT_NIL_TOL)?.dim() as f64;
    certs.push(Check::at_least("kernel_dim_mn", ker, part));
    certs.push(Check::info("padding", (m.nrows() - t.nrows()) as f64));
    Ok(())
}

fn certify_sandwich(certs: &mut Certificates, p: &Payloads, ts: &[Matrix]) -> Result<()> {
    let n = get(p, "n")?;
    nil_factor_checks(certs, "n", n);
    for (i, t) in ts.iter().enumerate() {
        let ni = get(p, &format!("n{i}"))?;
        let target = padded_target(t, n.nrows())?;
        certs.push(Check::at_most(format!("residual{i}"), relative_residual(&(n * ni * n), &target), NIL_RESIDUAL));
        nil_factor_checks(certs, &format!("n{i}"), ni);
    }
    Ok(())
}

fn certify_nil_two_sided(certs: &mut Certificates, p: &Payloads, ts: &[Matrix]) -> Result<()> {
    let (n1, n2) = (get(p, "n1")?, get(p, "n2")?);
    nil_factor_checks(certs, "n1", n1);
    nil_factor_checks(certs, "n2", n2);
    for (i, t) in ts.iter().enumerate() {
        let s = get(p, &format!("s{i}"))?;
        let target = padded_target(t, n1.nrows())?;
        certs.push(Check::at_most(format!("residual{i}"), relative_residual(&(n1 * s * n2), &target), NIL_RESIDUAL));
        certs.push(Check::at_most(format!("n1s{i}.cube"), cube_ratio(&(n1 * s)), CUBE));
        certs.push(Check::at_most(format!("s{i}n2.cube"), cube_ratio(&(s * n2)), CUBE));
    }
    Ok(())
}

fn certify_qn_member(certs: &mut Certificates, p: &Payloads, i: usize, qn: &QnOptions) -> Result<()> {
    let pre = format!("m{i}_");
    let blocks = blocks_from(p, &pre)?;
    if let Some(t) = p.get(&format!("{pre}t")) {
        let (v, v_inv) = (get(p, &format!("{pre}v"))?, get(p, &format!("{pre}v_inv"))?);
        let target = padded_target(t, v.nrows())?;
        let r = fro(&(v * target * v_inv - blocks.assemble())) / (1.0 + fro(t));
        certs.push(Check::at_most(format!("{pre}canonical_residual"), r, CANONICAL_RESIDUAL));
    }
    let f = factor_quasinilpotent(&blocks, qn)?;
    certs.push(Check::at_most(format!("{pre}product_residual"), f.product_residual, 1e-10));
    for (name, c) in [("q1", &f.cert_q1), ("q2", &f.cert_q2)] {
        certs.push(Check::flag(format!("{pre}{name}.triangular_certificate"), c.valid));
        for k in 0..2 {
            certs.push(Check::at_most(format!("{pre}{name}.corner{}.estimate", k + 1), c.corner_estimates[k], c.threshold));
            certs.sequence(format!("{pre}{name}.corner{}.norms", k + 1), &c.corner_norms[k].values);
        }
    }
    for (name, b) in [("l", &f.l_bound), ("k", &f.k_bound)] {
        certs.push(Check::flag(format!("{pre}{name}_shift.power_bound"), b.pass));
        certs.sequence(format!("{pre}{name}_shift.powers"), &b.entries.iter().map(|e| e.computed).collect::<Vec<_>>());
        certs.sequence(format!("{pre}{name}_shift.bounds"), &b.entries.iter().map(|e| e.bound).collect::<Vec<_>>());
    }
    Ok(())
}

fn shift_from(p: &Payloads, prefix: &str, side: FactorSide, cofactors: Vec<Matrix>) -> Result<ShiftFactorization> {
    let weights: Vec<f64> = get(p, &format!("{prefix}weights"))?.iter().map(|z| z.re).collect();
    Ok(ShiftFactorization {
        basis: SubspaceBasis::new(get(p, &format!("{prefix}basis"))?.clone())?,
        lambdas: weights.iter().map(|w| w.powi(4)).collect(),
        weights,
        q: get(p, &format!("{prefix}q"))?.clone(),
        cofactors,
        cofactor_coords: Vec::new(),
        side,
    })
}

/// `Φ·S·Φ*` against the stored `Q`, and the Gelfand estimate of the shift.
fn shift_checks(certs: &mut Certificates, name: &str, f: &ShiftFactorization, n_max: usize) -> Result<()> {
    let n = f.dim();
    let mut s = zeros(n, n);
    for j in 0..n.saturating_sub(1) {
        let (r, c) = match f.side {
            FactorSide::Right => (j + 1, j),
            FactorSide::Left => (j, j + 1),
        };
        s[(r, c)] = crate::linalg::c(f.weights[j], 0.0);
    }
    let rebuilt = f.basis.matrix() * s * f.basis.matrix().adjoint();
    certs.push(Check::at_most(format!("{name}.shift_structure"), max_abs(&(rebuilt - &f.q)), 1e-12));
    certs.push(Check::flag(format!("{name}.weights_non_increasing"), f.weights.windows(2).all(|w| w[1] <= w[0])));
    let seq = f.shift_power_norms(n_max.min(n.max(1)))?;
    certs.sequence(format!("{name}.power_norms"), &seq.values);
    certs.push(Check::info(format!("{name}.gelfand"), crate::blockop::gelfand_estimate(&seq)));
    Ok(())
}

fn certify_compact(certs: &mut Certificates, p: &Payloads, ts: &[Matrix], side: FactorSide, params: &Value) -> Result<()> {
    let general: GeneralOptions = param(params, "general")?;
    let ls: Vec<Matrix> = (0..ts.len()).map(|i| get(p, &format!("l{i}")).cloned()).collect::<Result<_>>()?;
    let f = shift_from(p, "", side, ls)?;
    let trunc = f.truncation_bound();
    for (i, (k, r)) in ts.iter().zip(f.residuals(ts)).enumerate() {
        let limit = trunc * (1.0 + 1e-9) + COMPACT_RESIDUAL * (1.0 + norm2(k));
        certs.push(Check::at_most(format!("residual{i}"), r, limit));
    }
    shift_checks(certs, "q", &f, general.n_max)
}

fn certify_two_sided(certs: &mut Certificates, p: &Payloads, ts: &[Matrix], params: &Value) -> Result<()> {
    let general: GeneralOptions = param(params, "general")?;
    let left = shift_from(p, "left_", FactorSide::Left, Vec::new())?;
    let right = shift_from(p, "right_", FactorSide::Right, Vec::new())?;
    let trunc = left.truncation_bound() * right.weights.first().copied().unwrap_or(0.0) + right.truncation_bound();
    for (i, k) in ts.iter().enumerate() {
        let l = get(p, &format!("l{i}"))?;
        let r = norm2(&(&left.q * l * &right.q - k));
        let limit = trunc * (1.0 + 1e-9) + COMPACT_RESIDUAL * (1.0 + norm2(k));
        certs.push(Check::at_most(format!("residual{i}"), r, limit));
    }
    shift_checks(certs, "q1", &left, general.n_max)?;
    shift_checks(certs, "q2", &right, general.n_max)
}

fn certify_general(certs: &mut Certificates, p: &Payloads, ts: &[Matrix], params: &Value) -> Result<()> {
    let general: GeneralOptions = param(params, "general")?;
    let (v, v_inv, q1p, q2p) = (get(p, "v")?, get(p, "v_inv")?, get(p, "q1p")?, get(p, "q2p")?);
    let r = shift_from(p, "r_", FactorSide::Left, Vec::new())?;
    let q = shift_from(p, "q_", FactorSide::Right, Vec::new())?;
    let q1 = v_inv * q1p * v;
    let q2 = v_inv * q2p * v;
    let mut stacked = Vec::new();
    for (i, t) in ts.iter().enumerate() {
        let s = get(p, &format!("s{i}"))?;
        let target = padded_target(t, v.nrows())?;
        let norm = 1.0 + fro(t);
        let res = fro(&(q1p * s * q2p - v * &target * v_inv)) / norm;
        certs.push(Check::at_most(format!("residual{i}"), res, GENERAL_RESIDUAL));
        let back = fro(&(&q1 * (v_inv * s * v) * &q2 - &target)) / norm;
        certs.push(Check::at_most(format!("pullback_residual{i}"), back, GENERAL_RESIDUAL));
        stacked.push(vec![s.clone()]);
    }
    let d = r.q.nrows();
    let z = zeros(d, d);
    for (name, qp, corner) in [("q1p", q1p, &r.q), ("q2p", q2p, &q.q)] {
        let cube = qp * qp * qp;
        let diag = assemble(&[
            vec![corner.clone(), z.clone(), z.clone()],
            vec![z.clone(), corner.clone(), z.clone()],
            vec![z.clone(), z.clone(), corner.clone()],
        ]);
        certs.push(Check::at_most(format!("{name}.cube_block_diagonal"), max_abs(&(cube - diag)), CUBE));
    }
    shift_checks(certs, "r", &r, general.n_max)?;
    shift_checks(certs, "q", &q, general.n_max)?;
    let sv = svd(&assemble(&stacked))?.singular_values;
    let smallest: Vec<f64> = sv.iter().rev().take(general.diagnostic_count).copied().collect();
    certs.sequence("stacked_smallest_singular_values", &smallest);
    certs.push(Check::at_most("stacked_smallest_max", smallest.iter().copied().fold(0.0, f64::max), STACKED_DIAGNOSTIC));
    Ok(())
}
