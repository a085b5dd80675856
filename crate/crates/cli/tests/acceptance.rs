//! End-to-end acceptance criteria, run through the `vwave` binary only.
//! Prints one PASS/FAIL line per criterion and exits non-zero if any fails.

use serde_json::Value;
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

struct Run {
    dir: PathBuf,
    manifest: Value,
    elapsed: Duration,
}

impl Run {
    fn summary(&self) -> &Value {
        &self.manifest["summary"]
    }

    fn read(&self, rel: &str) -> String {
        std::fs::read_to_string(self.dir.join(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }

    fn json(&self, rel: &str) -> Value {
        serde_json::from_str(&self.read(rel)).unwrap()
    }
}

fn workdir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance")
}

fn vwave(cmd: &str, config: &str, tag: &str, extra: &[&str]) -> Result<Run, String> {
    let dir = workdir().join(tag);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, config).map_err(|e| e.to_string())?;
    let out = dir.join("out");
    let start = Instant::now();
    let st = Command::new(env!("CARGO_BIN_EXE_vwave"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !st.status.success() {
        return Err(format!("{cmd} exited with {:?}: {}", st.status.code(), String::from_utf8_lossy(&st.stderr)));
    }
    let manifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    Ok(Run { dir: out, manifest, elapsed })
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn check(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_trivial() -> Result<String, String> {
    let c0 = 2.0;
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for h in [0.1, 0.05] {
        let run = vwave("solve", &format!(r#"{{"c": "2 + u^2", "M": 4, "h": {h}}}"#), &format!("c1_{h}"), &[])?;
        slowest = slowest.max(run.elapsed);
        for r in csv_rows(&run.read("grid.csv")) {
            let v: Vec<f64> = r[2..].iter().map(|s| num(s)).collect();
            let [xl, yl, u, w, z, p, q, x, t] = v[..] else { return Err("grid.csv columns".into()) };
            let errs = [t - (xl + yl) / (2.0 * c0), x - (xl - yl) / 2.0, u, w, z, p - 1.0, q - 1.0];
            worst = errs.iter().fold(worst, |m, e| m.max(e.abs()));
        }
    }
    check(
        worst <= 1e-12 && slowest < Duration::from_secs(1),
        format!("max node error {worst:.2e} (<= 1e-12), slowest run {:.2}s (< 1s)", slowest.as_secs_f64()),
    )
}

fn c2_dalembert() -> Result<String, String> {
    let t = 0.8;
    let u0 = |x: f64| (-x * x).exp();
    let mut errs = Vec::new();
    let mut last = Duration::ZERO;
    for h in [0.04, 0.02, 0.01] {
        let cfg = format!(r#"{{"c": "1", "morse_override": true, "u0": "exp(-x^2)", "u1": "0", "M": 6, "h": {h}, "t_samples": [{t}]}}"#);
        let run = vwave("slice", &cfg, &format!("c2_{h}"), &[])?;
        last = run.elapsed;
        let e = csv_rows(&run.read("slices/slice_000.csv"))
            .iter()
            .map(|r| {
                let x = num(&r[0]);
                (num(&r[1]) - 0.5 * (u0(x + t) + u0(x - t))).abs()
            })
            .fold(0.0, f64::max);
        errs.push((h, e));
    }
    let order = (errs[1].1 / errs[2].1).log2();
    let bound_ok = errs.iter().all(|&(h, e)| e <= 5.0 * h * h);
    check(
        bound_ok && (1.7..=2.3).contains(&order) && last < Duration::from_secs(30),
        format!(
            "errors {} (<= 5h^2), order {order:.3} in [1.7, 2.3], {:.2}s at h=0.01 (< 30s)",
            errs.iter().map(|(h, e)| format!("h={h}:{e:.2e}")).collect::<Vec<_>>().join(" "),
            last.as_secs_f64()
        ),
    )
}

fn c3_energy() -> Result<String, String> {
    let c = |u: f64| 1.0 + 0.25 * u * u;
    let density = |x: f64| {
        let g = (-x * x).exp();
        let (u0, du0, u1) = (g, -2.0 * x * g, 5.0 * g);
        0.5 * (u1 * u1 + c(u0).powi(2) * du0 * du0)
    };
    let e0 = simpson(density, -10.0, 10.0, 20000);
    let times = [0.5, 1.0, 1.5, 2.0, 2.5];
    let mut worst = Vec::new();
    let mut spans = false;
    for h in [0.02, 0.01] {
        let cfg = format!(
            r#"{{"c": "1 + 0.25*u^2", "u0": "exp(-x^2)", "u1": "5*exp(-x^2)", "M": 8, "h": {h}, "t_samples": {times:?}}}"#
        );
        let run = vwave("energy", &cfg, &format!("c3_{h}"), &[])?;
        let rows = csv_rows(&run.read("energy.csv"));
        let markers: Vec<f64> = rows.iter().map(|r| num(&r[5])).collect();
        spans = markers[0] == 0.0 && markers[markers.len() - 1] > 0.0;
        worst.push(rows.iter().map(|r| (num(&r[1]) - e0).abs() / e0).fold(0.0, f64::max));
    }
    let order = (worst[0] / worst[1]).log2();
    check(
        spans && worst[1] <= 1e-3 && order >= 1.8,
        format!(
            "E(0) = {e0:.10}, max |E(t)-E(0)|/E(0) = {:.2e} at h=0.02, {:.2e} at h=0.01 (<= 1e-3), order {order:.2} (>= 1.8), singularity inside sampled times: {spans}",
            worst[0], worst[1]
        ),
    )
}

fn c4_consistency() -> Result<String, String> {
    let sets = [
        r#""c": "1 + 0.25*u^2", "u0": "exp(-x^2)", "u1": "0""#,
        r#""c": "1 + 0.25*u^2", "u0": "0", "u1": "x*exp(-x^2)""#,
        r#""c": "2 + sin(u)", "u0": "0.8*exp(-(x-1)^2)", "u1": "0.3*exp(-x^2)""#,
    ];
    let mut min_order = f64::INFINITY;
    let mut parts = Vec::new();
    for (k, set) in sets.iter().enumerate() {
        let mut res = Vec::new();
        for h in [0.04, 0.02] {
            let run = vwave("solve", &format!(r#"{{{set}, "M": 4, "h": {h}}}"#), &format!("c4_{k}_{h}"), &[])?;
            let c = &run.summary()["consistency"];
            res.push([c["r_u"].as_f64().unwrap(), c["r_x"].as_f64().unwrap(), c["r_t"].as_f64().unwrap()]);
        }
        let orders: Vec<f64> = (0..3).map(|i| (res[0][i] / res[1][i]).log2()).collect();
        min_order = orders.iter().fold(min_order, |m, &o| m.min(o));
        parts.push(format!("set {}: r_u {:.2} r_x {:.2} r_t {:.2}", k + 1, orders[0], orders[1], orders[2]));
    }
    check(min_order >= 1.8, format!("orders {} (>= 1.8)", parts.join("; ")))
}

type Polyline = (String, Vec<[f64; 2]>);
type Check = fn() -> Result<String, String>;

fn polylines(csv: &str) -> Vec<Polyline> {
    let mut out: Vec<(String, String, Vec<[f64; 2]>)> = Vec::new();
    for r in csv_rows(csv) {
        if out.last().is_none_or(|c| c.0 != r[0]) {
            out.push((r[0].clone(), r[1].clone(), Vec::new()));
        }
        out.last_mut().unwrap().2.push([num(&r[3]), num(&r[4])]);
    }
    out.into_iter().map(|(_, f, p)| (f, p)).collect()
}

fn to_polyline(p: [f64; 2], line: &[[f64; 2]]) -> f64 {
    let d = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut best = d(p, line[0]);
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let v = [b[0] - a[0], b[1] - a[1]];
        let l2 = v[0] * v[0] + v[1] * v[1];
        let s = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * v[0] + (p[1] - a[1]) * v[1]) / l2).clamp(0.0, 1.0) };
        best = best.min(d(p, [a[0] + s * v[0], a[1] + s * v[1]]));
    }
    best
}

fn hausdorff(a: &[Polyline], b: &[Polyline], family: &str) -> f64 {
    let one = |x: &[Polyline], y: &[Polyline]| {
        let mut m: f64 = 0.0;
        for (_, pts) in x.iter().filter(|c| c.0 == family) {
            for &p in pts {
                let near = y.iter().filter(|c| c.0 == family).map(|(_, l)| to_polyline(p, l)).fold(f64::INFINITY, f64::min);
                m = m.max(near);
            }
        }
        m
    };
    one(a, b).max(one(b, a))
}

fn c5_singular_structure() -> Result<String, String> {
    let data = r#""c": "1 + 0.25*u^2", "u0": "exp(-(x-4)^2) + exp(-(x+4)^2)", "u1": "5*exp(-(x-4)^2) + 5*exp(-(x+4)^2)", "M": 8"#;
    let threshold = 0.05;
    let mut runs = Vec::new();
    for h in [0.02, 0.01] {
        runs.push((h, vwave("singular", &format!("{{{data}, \"h\": {h}}}"), &format!("c5_{h}"), &[])?));
    }
    let (h, fine) = (&runs[1].0, &runs[1].1);
    let s = fine.summary();
    let census = &s["census"];
    let ncurves = census["w_curves"].as_u64().unwrap() + census["z_curves"].as_u64().unwrap();
    let crossings = census["crossing"].as_u64().unwrap();
    let minima: Vec<f64> = s["residual_minima"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let residuals_ok = minima.iter().all(|&r| r > threshold);
    let set = fine.json("singular.json");
    let linked = set["set"]["curves"].as_array().unwrap().iter().all(|c| c["points"].as_array().unwrap().len() >= 2)
        && s["ambiguous_cells"].as_u64() == Some(0);
    let mut perp: f64 = 0.0;
    for p in set["set"]["points"].as_array().unwrap().iter().filter(|p| p["kind"] == "CrossingQ") {
        // closed forms vanish at the located crossing; the differenced values do not
        for key in ["w_y", "z_x", "w_y_fd", "z_x_fd"] {
            perp = perp.max(p["diagnostics"][key].as_f64().unwrap().abs());
        }
    }
    let coarse = polylines(&runs[0].1.read("singular.csv"));
    let finel = polylines(&fine.read("singular.csv"));
    let dist = hausdorff(&coarse, &finel, "W").max(hausdorff(&coarse, &finel, "Z"));
    let hc = runs[0].0;
    check(
        residuals_ok && ncurves > 0 && crossings > 0 && linked && perp <= 10.0 * h * h && dist <= 2.0 * hc,
        format!(
            "{ncurves} curves, {crossings} crossings, residual minima {:.3} (> {threshold}), max |w_Y|,|z_X| at crossings {perp:.2e} (<= 10h^2 = {:.1e}), curve shift h={hc}->{h}: {dist:.2e} (<= 2h = {})",
            minima.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
            10.0 * h * h,
            2.0 * hc
        ),
    )
}

fn c6_relabel() -> Result<String, String> {
    let h = 0.04;
    let cfg = format!(
        r#"{{"c": "1 + 0.25*u^2", "u0": "exp(-x^2)", "u1": "5*exp(-x^2)", "M": 8, "h": {h}, "t_samples": [0.5, 1.5, 2.5],
            "relabel": {{"phi": "2*s", "psi": "1.5*s"}}}}"#
    );
    let run = vwave("relabel-check", &cfg, "c6", &[])?;
    let s = run.summary();
    let gd = s["graph_distance"]["max"].as_f64().unwrap();
    let ntimes = s["graph_distance"]["per_time"].as_array().unwrap().len();
    let tp = &s["turning_points"];
    let n = tp["original"].as_u64().unwrap();
    let d = tp["distance"].as_f64().unwrap_or(f64::INFINITY);
    check(
        ntimes == 3 && gd <= 10.0 * h * h && n > 0 && tp["relabeled"].as_u64() == Some(n) && d <= 2.0 * h,
        format!("graph distance {gd:.2e} over {ntimes} times (<= 10h^2 = {:.1e}), {n} turning points matched within {d:.2e} (<= 2h)", 10.0 * h * h),
    )
}

fn c7_rank() -> Result<String, String> {
    let mut parts = Vec::new();
    let mut ok = true;
    for pat in ["P1", "P2", "P3"] {
        let mut gaps = Vec::new();
        let mut sigma = 0.0;
        for (h, delta) in [(0.02, 1e-2), (0.01, 1e-3)] {
            let cfg = format!(
                r#"{{"c": "1 + u^2", "M": 1, "h": {h}, "perturb": {{"pattern": "{pat}", "base": "engineered", "radius": 0.5, "delta": {delta}}}}}"#
            );
            let run = vwave("perturb-check", &cfg, &format!("c7_{pat}_{h}"), &[])?;
            sigma = run.summary()["sigma_min"].as_f64().unwrap();
            gaps.push((sigma - run.summary()["structural_sigma_min"].as_f64().unwrap()).abs());
        }
        ok &= sigma >= 0.5 && gaps[1] < gaps[0];
        parts.push(format!("{pat}: sigma_min {sigma:.4}, |sigma - structural| {:.1e} -> {:.1e}", gaps[0], gaps[1]));
    }
    check(ok, parts.join("; "))
}

fn c8_sweep() -> Result<String, String> {
    let synthetic = r#"{"c": "1", "morse_override": true, "M": 1, "h": 0.02, "sweep": {"family": "crossing", "n_lambda": 33, "lambda_star": 0.5}}"#;
    let generic = r#"{"c": "1 + 0.25*u^2", "u0": "exp(-x^2)", "u1": "x*exp(-x^2)", "M": 2, "h": 0.02, "sweep": {"family": "expr", "n_lambda": 33}}"#;
    let a = vwave("sweep", synthetic, "c8_synthetic", &[])?;
    let b = vwave("sweep", generic, "c8_generic", &[])?;
    let br = a.summary()["brackets"].as_array().unwrap().clone();
    let one = br.len() == 1 && {
        let (lo, hi) = (br[0]["lo"].as_f64().unwrap(), br[0]["hi"].as_f64().unwrap());
        lo <= 0.5 && 0.5 <= hi && hi - lo <= 1e-3
    };
    let none = b.summary()["brackets"].as_array().unwrap().is_empty();
    let slow = a.elapsed.max(b.elapsed);
    check(
        one && none && slow < Duration::from_secs(300),
        format!(
            "synthetic brackets {}, generic brackets {}, slowest sweep {:.1}s (< 300s)",
            serde_json::to_string(&br).unwrap(),
            b.summary()["brackets"],
            slow.as_secs_f64()
        ),
    )
}

fn artifacts(run: &Run) -> Vec<(String, String)> {
    run.manifest["artifacts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|a| (a["path"].as_str().unwrap().to_string(), a["sha256"].as_str().unwrap().to_string()))
        .collect()
}

fn same_bytes(a: &Run, b: &Run) -> bool {
    let (la, lb) = (artifacts(a), artifacts(b));
    la == lb && la.iter().all(|(p, _)| std::fs::read(a.dir.join(p)).ok() == std::fs::read(b.dir.join(p)).ok())
}

fn c9_determinism() -> Result<String, String> {
    let blowup = r#"{"c": "1 + 0.25*u^2", "u0": "exp(-(x-4)^2) + exp(-(x+4)^2)", "u1": "5*exp(-(x-4)^2) + 5*exp(-(x+4)^2)", "M": 8, "h": 0.04, "t_samples": [0.5, 2.0, 3.0]}"#;
    let sweep = r#"{"c": "1", "morse_override": true, "M": 1, "h": 0.05, "sweep": {"family": "crossing", "n_lambda": 9}}"#;
    let mut checked = 0;
    for (cmd, cfg) in [("solve", blowup), ("slice", blowup), ("energy", blowup), ("singular", blowup), ("sweep", sweep)] {
        let a = vwave(cmd, cfg, &format!("c9_{cmd}_a"), &[])?;
        let b = vwave(cmd, cfg, &format!("c9_{cmd}_b"), &[])?;
        let s = vwave(cmd, cfg, &format!("c9_{cmd}_seq"), &["--sequential"])?;
        if !same_bytes(&a, &b) || !same_bytes(&a, &s) {
            return Err(format!("{cmd}: artifacts differ between identical runs"));
        }
        checked += artifacts(&a).len();
    }
    Ok(format!("{checked} artifacts byte-identical across repeated and sequential runs"))
}

fn main() {
    // `cargo test -- <filter>` passes arguments; run everything regardless,
    // but honour `--list` so test discovery does not execute the suite.
    if std::env::args().any(|a| a == "--list") {
        for k in 1..=9 {
            println!("criterion_{k}: test");
        }
        return;
    }
    let _ = std::fs::create_dir_all(workdir());
    let criteria: [(&str, Check); 9] = [
        ("exact trivial solution", c1_trivial),
        ("d'Alembert oracle", c2_dalembert),
        ("energy conservation", c3_energy),
        ("consistency residual orders", c4_consistency),
        ("singular-set structure", c5_singular_structure),
        ("relabeling invariance", c6_relabel),
        ("rank certification", c7_rank),
        ("lambda sweep brackets", c8_sweep),
        ("determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} [{name}]: {tag} ({:.1}s) {detail}", k + 1, start.elapsed().as_secs_f64());
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
