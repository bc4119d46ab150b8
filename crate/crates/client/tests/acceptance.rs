//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that nothing failed. Run with `--nocapture` to see the lines.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use dpp_client::RemoteExecutor;
use dpp_core::apps::codec::{self, analysis_program, encode_program};
use dpp_core::apps::fft::{self, leaf_program, max_relative_error, naive_dft, random_signal};
use dpp_core::apps::image::{procedural, psnr};
use dpp_core::fixtures::{parse_corpus, random_pointwise_program, Expect, KERNEL_CORPUS, FAN_ROT_ADDER, FAN_ROT_ADDER_FLOAT_SHIFT};
use dpp_core::kernel::{compile, Stage};
use dpp_core::types::Direction;
use dpp_core::{parse_program, program_id, serialize_program, Executor, LocalExecutor, Program, StreamData, Streams};
use dpp_server::{spawn, Config};
use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// fan-rot-adder id, cross-checked against an independent canonical-JSON
/// SHA-256 (sorted keys, compact separators).
const FAN_ROT_ADDER_ID: &str = "61ad51d3ab3295eff94debe143306d5ef4355061b13c982ab0caac49563bd504";

enum Verdict {
    Pass(String),
    Fail(String),
    Unverified(String),
}

fn within(limit: Duration, started: Instant, detail: String) -> Verdict {
    let took = started.elapsed();
    if took <= limit {
        Verdict::Pass(format!("{detail}; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()))
    } else {
        Verdict::Fail(format!("{detail}; took {:.2}s, limit {}s", took.as_secs_f64(), limit.as_secs()))
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn fan_rot_adder() -> Verdict {
    let t = Instant::now();
    let r = (|| -> Result<String, String> {
        let p = parse_program(FAN_ROT_ADDER.as_bytes()).map_err(|e| e.to_string())?;
        check(p.validate().is_ok(), || format!("validate: {}", p.validate()))?;
        let bytes = serialize_program(&p);
        let again = parse_program(&bytes).map_err(|e| e.to_string())?;
        check(again == p, || "re-parsed program differs".into())?;
        check(serialize_program(&again) == bytes, || "serialization not byte-stable".into())?;
        let id = program_id(&p);
        check(id == FAN_ROT_ADDER_ID && program_id(&again) == id, || format!("id {id}"))?;
        let free: Vec<(Direction, String)> = p.free_points().iter().map(|f| (f.direction, f.stream_name())).collect();
        check(free == [(Direction::Input, "0.z".into()), (Direction::Output, "2.z".into())], || format!("free points {free:?}"))?;
        Ok("round trip byte-stable, id pinned, free points {in 0.z, out 2.z}".into())
    })();
    match r {
        Ok(d) => within(Duration::from_secs(1), t, d),
        Err(e) => Verdict::Fail(e),
    }
}

fn kernel_corpus() -> Verdict {
    let r = (|| -> Result<String, String> {
        let mut corpus = parse_corpus(KERNEL_CORPUS)?;
        // generated application kernels must type-check too
        let mut apps: Vec<Program> = (1..=3).map(|k| leaf_program(k).unwrap()).collect();
        apps.push(analysis_program(512, 512));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let codebook: Vec<[f32; 16]> = (0..256).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect();
        apps.push(encode_program(&codebook));
        let mut app_kernels = 0;
        for p in &apps {
            for (name, node) in &p.kernels {
                corpus.push(dpp_core::fixtures::CorpusKernel {
                    name: format!("app:{name}"),
                    io: node.io.clone(),
                    expect: Expect::Ok,
                    body: node.body.clone(),
                });
                app_kernels += 1;
            }
        }
        for required in ["adder", "fan", "rot_retyped_float", "rot_float_shift"] {
            check(corpus.iter().any(|k| k.name == required), || format!("corpus lacks {required}"))?;
        }
        check(corpus.len() >= 30, || format!("only {} kernels", corpus.len()))?;
        let failures: Vec<String> = corpus.iter().filter_map(|k| k.check().err().map(|e| format!("{}: {e}", k.name))).collect();
        check(failures.is_empty(), || failures.join("; "))?;

        let shifted = Program::from_json(FAN_ROT_ADDER_FLOAT_SHIFT).map_err(|e| e.to_string())?;
        let rot = &shifted.kernels["rot"];
        let e = compile(&rot.body, &rot.io).err().ok_or("rot with a float shift was accepted")?;
        check(e.stage == Stage::Type && e.message.contains("shift requires integer operands"), || e.to_string())?;
        Ok(format!("{} kernels ({app_kernels} generated by the apps) match their verdicts; rot with a float shift: {e}", corpus.len()))
    })();
    r.map_or_else(Verdict::Fail, Verdict::Pass)
}

fn concat_bytes(out: &Streams) -> Vec<u8> {
    out.iter().flat_map(|(name, d)| name.bytes().chain(d.buffer.to_le_bytes())).collect()
}

fn engine_determinism() -> Verdict {
    let t = Instant::now();
    let n = workers().max(4);
    let r = (|| -> Result<String, String> {
        for seed in 0..10 {
            let rp = random_pointwise_program(seed, 5000);
            let reference = concat_bytes(&LocalExecutor::new(1).execute(&rp.program, rp.inputs.clone(), Some(5000)).map_err(|e| e.to_string())?);
            for w in [4, 64, 4096] {
                for par in [1, n] {
                    let out = LocalExecutor::new(par).execute(&rp.program, rp.inputs.clone(), Some(w)).map_err(|e| e.to_string())?;
                    check(concat_bytes(&out) == reference, || format!("seed {seed}, W={w}, parallelism {par} differs"))?;
                }
            }
        }
        Ok(format!("10 programs x W in {{4, 64, 4096}} x parallelism {{1, {n}}} byte-identical"))
    })();
    match r {
        Ok(d) => within(Duration::from_secs(30), t, d),
        Err(e) => Verdict::Fail(e),
    }
}

fn energy(x: &[Complex32]) -> f64 {
    x.iter().map(|c| c.norm_sqr() as f64).sum()
}

fn fft_oracle() -> Verdict {
    let t = Instant::now();
    let exec = LocalExecutor::new(workers());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let r = (|| -> Result<String, String> {
        let (mut worst, mut worst_parseval, mut worst_linear) = (0.0f64, 0.0f64, 0.0f64);
        for bits in 3..=12 {
            let n = 1usize << bits;
            let x = random_signal(n, 1000 + bits as u64);
            let y = random_signal(n, 2000 + bits as u64);
            let oracle = naive_dft(&x);
            let a = Complex32::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let b = Complex32::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let mix: Vec<Complex32> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            for k in 1..=3 {
                let fx = fft::fft(&x, k, &exec).map_err(|e| e.to_string())?;
                let err = max_relative_error(&fx, &oracle);
                worst = worst.max(err);
                check(err < 1e-4, || format!("N={n} k={k}: relative error {err:e}"))?;

                let parseval = (energy(&x) - energy(&fx) / n as f64).abs() / energy(&x);
                worst_parseval = worst_parseval.max(parseval);
                check(parseval < 1e-3, || format!("N={n} k={k}: Parseval off by {parseval:e}"))?;

                let fy = fft::fft(&y, k, &exec).map_err(|e| e.to_string())?;
                let fmix = fft::fft(&mix, k, &exec).map_err(|e| e.to_string())?;
                let combined: Vec<Complex32> = fx.iter().zip(&fy).map(|(p, q)| a * p + b * q).collect();
                let lin = max_relative_error(&fmix, &combined);
                worst_linear = worst_linear.max(lin);
                check(lin < 1e-3, || format!("N={n} k={k}: linearity off by {lin:e}"))?;
            }
        }
        Ok(format!("N=8..4096, k=1..3: max rel error {worst:.2e}, Parseval {worst_parseval:.2e}, linearity {worst_linear:.2e}"))
    })();
    match r {
        Ok(d) => within(Duration::from_secs(60), t, d),
        Err(e) => Verdict::Fail(e),
    }
}

fn fig6_shape() -> Verdict {
    let steps = 8;
    let (lo, hi) = (20_000f64, 10_000_000f64);
    let sizes: Vec<usize> = (0..steps).map(|i| (lo * (hi / lo).powf(i as f64 / (steps - 1) as f64)).round() as usize).collect();
    let exec = LocalExecutor::new(workers());
    let rows = match fft::bench(&sizes, &[1, 2, 3], 1024, 2, "local", &exec) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let mut fits = Vec::new();
    let mut ok = true;
    for k in 1..=3 {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r.k == k).map(|r| (r.bytes as f64, r.seconds)).collect();
        let (slope, r2) = fft::loglog_fit(&pts);
        ok &= r2 > 0.98 && (slope - 1.0).abs() <= 0.15;
        fits.push(format!("k={k}: slope {slope:.3}, R2 {r2:.4}"));
    }
    let detail = format!("20 KB..10 MB, {steps} sizes, log-log fits {}", fits.join("; "));
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn transport_transparency() -> Verdict {
    let t = Instant::now();
    let server = match spawn(Config::ephemeral()) {
        Ok(s) => s,
        Err(e) => return Verdict::Fail(e.to_string()),
    };
    let r = (|| -> Result<String, String> {
        let remote = RemoteExecutor::new(&server.url()).map_err(|e| e.to_string())?;
        let local = LocalExecutor::new(workers());
        let mut cases: Vec<(String, Program, Streams, usize)> = Vec::new();

        // a 10 MB float2 stream through fan-rot-adder at W=4096
        let fan_rot_adder = Program::from_json(FAN_ROT_ADDER).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let values: Vec<f32> = (0..10_000_000 / 4).map(|_| rng.random_range(-1000.0..1000.0)).collect();
        cases.push(("fan_rot_adder 10 MB".into(), fan_rot_adder, [("0.z".to_string(), StreamData::from_f32("float2".parse().unwrap(), values))].into(), 4096));
        for seed in 0..10 {
            let rp = random_pointwise_program(seed, 3000);
            cases.push((format!("random {seed}"), rp.program, rp.inputs, 256));
        }
        for k in 1..=3 {
            let x: Vec<f32> = random_signal(4096, k as u64).iter().flat_map(|c| [c.re, c.im]).collect();
            let ty = format!("float{}", 2 << k).parse().unwrap();
            cases.push((format!("dft{}", 1 << k), leaf_program(k).unwrap(), [("0.x".to_string(), StreamData::from_f32(ty, x))].into(), 100));
        }
        let img = procedural(128, 64, 7);
        let rgb = dpp_core::Buffer::UChar(codec::block_raster(&img));
        cases.push((
            "codec analysis".into(),
            analysis_program(128, 64),
            [("0.rgb".to_string(), StreamData::new("uchar4".parse().unwrap(), rgb))].into(),
            128 * 64,
        ));

        let mut bytes = 0usize;
        for (name, program, inputs, w) in &cases {
            bytes += inputs.values().map(|d| d.buffer.to_le_bytes().len()).sum::<usize>();
            let a = local.execute(program, inputs.clone(), Some(*w)).map_err(|e| format!("{name}: local: {e}"))?;
            let b = remote.execute(program, inputs.clone(), Some(*w)).map_err(|e| format!("{name}: remote: {e}"))?;
            check(concat_bytes(&a) == concat_bytes(&b), || format!("{name}: local and remote outputs differ"))?;
        }
        Ok(format!("{} fixtures, {:.1} MB of input, byte-identical", cases.len(), bytes as f64 / 1e6))
    })();
    match r {
        Ok(d) => within(Duration::from_secs(60), t, d),
        Err(e) => Verdict::Fail(e),
    }
}

fn codec_fixture() -> Verdict {
    let t = Instant::now();
    let exec = LocalExecutor::new(workers());
    let r = (|| -> Result<String, String> {
        let img = procedural(512, 512, 7);
        let raw = img.rgb.len();
        let a = codec::compress(&img, 256, 7, &exec).map_err(|e| e.to_string())?;
        let bytes = a.to_bytes();
        let ratio = bytes.len() as f64 / raw as f64;
        let out = codec::decompress(&a);
        let db = psnr(&img, &out);
        check(ratio <= 0.13, || format!("ratio {ratio:.4}"))?;
        check(db >= 25.0, || format!("PSNR {db:.2} dB"))?;
        let b = codec::compress(&img, 256, 7, &exec).map_err(|e| e.to_string())?;
        check(b.to_bytes() == bytes && codec::decompress(&b) == out, || "compression is not deterministic".into())?;
        check(codec::Compressed::from_bytes(&bytes).map_err(|e| e.to_string())? == a, || "container round trip".into())?;
        Ok(format!("512x512: {raw} -> {} bytes, ratio {ratio:.4}, PSNR {db:.2} dB, deterministic", bytes.len()))
    })();
    match r {
        Ok(d) => within(Duration::from_secs(60), t, d),
        Err(e) => Verdict::Fail(e),
    }
}

fn parallel_speedup() -> Verdict {
    let threads = workers();
    let sizes = [2_000_000usize];
    let time = |par: usize| -> Result<f64, String> {
        let rows = fft::bench(&sizes, &[3], 1024, 2, "local", &LocalExecutor::new(par)).map_err(|e| e.to_string())?;
        Ok(rows[0].seconds)
    };
    let r = (|| -> Result<(f64, f64), String> { Ok((time(1)?, time(threads.max(4))?)) })();
    match r {
        Err(e) => Verdict::Fail(e),
        Ok((one, many)) => {
            let ratio = many / one;
            let detail = format!("{threads} hardware threads: 1 worker {one:.3}s, {} workers {many:.3}s, ratio {ratio:.2}", threads.max(4));
            if threads < 4 {
                Verdict::Unverified(format!("{detail}; needs a machine with at least 4 hardware threads"))
            } else if ratio <= 0.6 {
                Verdict::Pass(detail)
            } else {
                Verdict::Fail(detail)
            }
        }
    }
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, fn() -> Verdict)> = vec![
        ("fan-rot-adder-fixture", fan_rot_adder),
        ("kernel-corpus", kernel_corpus),
        ("engine-determinism", engine_determinism),
        ("fft-oracle", fft_oracle),
        ("fft-bench-linear-shape", fig6_shape),
        ("transport-transparency", transport_transparency),
        ("codec", codec_fixture),
        ("parallel-speedup", parallel_speedup),
    ];
    let mut failed = Vec::new();
    let mut summary = BTreeMap::new();
    for (name, f) in criteria {
        let (tag, detail) = match f() {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed.push(name);
                ("FAIL", d)
            }
            Verdict::Unverified(d) => ("UNVERIFIED", d),
        };
        println!("{tag:<10} {name}: {detail}");
        *summary.entry(tag).or_insert(0) += 1;
    }
    println!("summary: {summary:?}");
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
