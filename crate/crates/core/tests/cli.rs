use std::path::{Path, PathBuf};

use limitsetlab::cli::{exit, run};
use limitsetlab::groups::{cyclic_group, fuchsian_one_holed_torus, schottky_group, GroupSpec, SurfaceGroupParams};
use limitsetlab::moebius::{Complex, MoebiusMap, RoundDisk};

fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

fn schottky(center: Complex, spread: f64, radius: f64) -> GroupSpec {
    let d = |x: f64, y: f64| RoundDisk::disk(center + c(x, y) * spread, radius).unwrap();
    schottky_group(&[(d(-1.0, 0.0), d(1.0, 0.0)), (d(0.0, -1.0), d(0.0, 1.0))]).unwrap()
}

fn write_spec(dir: &Path, name: &str, g: &GroupSpec) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, g.to_json().unwrap()).unwrap();
    p
}

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("limitsetlab").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn render_png_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "g.json", &schottky(c(0.0, 0.0), 1.0, 0.4));
    let png = dir.path().join("out.png");
    let (code, _, err) = call(&["render", spec.to_str().unwrap(), "--depth", "6", "--out", png.to_str().unwrap()]);
    assert_eq!(code, exit::OK, "{err}");
    let bytes = std::fs::read(&png).unwrap();
    assert_eq!(&bytes[1..4], b"PNG");
    assert!(bytes.windows(11).any(|w| w == b"limitsetlab"));

    let csv = dir.path().join("out.csv");
    let (code, _, _) = call(&["render", spec.to_str().unwrap(), "--depth", "4", "--out", csv.to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# limitsetlab "), "{header}");
    assert!(header.contains("\"depth\":4"));
    assert_eq!(lines.next(), Some("re,im"));

    let svg = dir.path().join("out.svg");
    let (code, _, _) = call(&["render", spec.to_str().unwrap(), "--depth", "3", "--out", svg.to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<!-- limitsetlab"));
    assert!(text.contains("<circle"));
}

#[test]
fn render_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    assert_eq!(call(&["render", bad.to_str().unwrap()]).0, exit::PARSE);
    let spec = write_spec(dir.path(), "g.json", &schottky(c(0.0, 0.0), 1.0, 0.4));
    let (code, _, err) = call(&["render", spec.to_str().unwrap(), "--depth", "12", "--prune-eps", "0", "--node-cap", "1000"]);
    assert_eq!(code, exit::CAP);
    assert!(err.contains("nodes"), "{err}");
    assert_eq!(call(&["render", spec.to_str().unwrap(), "--out", "x.bmp"]).0, exit::USAGE);
    assert_eq!(call(&["frobnicate"]).0, exit::USAGE);
}

#[test]
fn dim_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cyc = write_spec(dir.path(), "cyc.json", &cyclic_group(&MoebiusMap::diagonal(c(2.0, 0.0)).unwrap()).unwrap());
    let (code, out, err) = call(&["dim", cyc.to_str().unwrap()]);
    assert_eq!(code, exit::OK, "{err}");
    let row = out.lines().nth(2).unwrap();
    assert!(row.starts_with("box,0.000000,1.000000,"), "{row}");

    let fuchsian =
        write_spec(dir.path(), "f.json", &fuchsian_one_holed_torus(SurfaceGroupParams { boundary_length: 1.0 }).unwrap());
    let (code, out, _) = call(&["dim", fuchsian.to_str().unwrap()]);
    assert_eq!(code, exit::OK);
    let d: f64 = out.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(d > 0.5 && d <= 1.05, "{d}");

    // A pairing disk filling most of the enclosing root circle.
    let pair = (RoundDisk::disk(c(0.0, 0.0), 1.0).unwrap(), RoundDisk::disk(c(1.2, 0.0), 0.05).unwrap());
    let fat = write_spec(dir.path(), "fat.json", &schottky_group(&[pair]).unwrap());
    let (code, _out, err) = call(&["dim", fat.to_str().unwrap(), "--method", "certificate"]);
    assert_eq!(code, exit::CERTIFICATE, "{err} {_out}");

    let thin = write_spec(dir.path(), "thin.json", &schottky(c(0.0, 0.0), 1.0, 0.05));
    let (code, out, err) = call(&["dim", thin.to_str().unwrap(), "--method", "certificate", "--alpha", "1.2"]);
    assert_eq!(code, exit::OK, "{err}");
    assert!(out.lines().nth(1).unwrap().starts_with("method,alpha"));
}

#[test]
fn pullapart_modes() {
    let dir = tempfile::tempdir().unwrap();
    let g0 = write_spec(dir.path(), "g0.json", &schottky(c(-3.0, 0.0), 0.5, 0.1));
    let g1 = write_spec(dir.path(), "g1.json", &schottky(c(3.0, 0.0), 0.5, 0.1));
    let (code, out, err) = call(&["pullapart", g0.to_str().unwrap(), g1.to_str().unwrap(), "--kmax", "4", "--depth", "5"]);
    assert_eq!(code, exit::OK, "{err}");
    let ratios: Vec<f64> = out.lines().skip(2).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(ratios.len(), 4);
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");

    assert_eq!(call(&["pullapart", g0.to_str().unwrap(), g1.to_str().unwrap(), "--kmax", "0"]).0, exit::USAGE);

    // A pulling axis whose isometric disks meet the first factor's disks.
    let gamma = MoebiusMap::loxodromic_with_axis(c(-3.5, 0.0).into(), c(-2.5, 0.0).into(), 1.0, 0.0).unwrap();
    let gpath = dir.path().join("gamma.json");
    std::fs::write(&gpath, serde_json::to_string(&gamma).unwrap()).unwrap();
    let (code, _, _) = call(&["pullapart", g0.to_str().unwrap(), "--hnn", gpath.to_str().unwrap(), "--kmax", "3"]);
    assert_eq!(code, exit::KLEIN);

    let gamma = MoebiusMap::loxodromic_with_axis(c(0.0, 2.0).into(), c(0.0, -2.0).into(), 1.0, 0.0).unwrap();
    std::fs::write(&gpath, serde_json::to_string(&gamma).unwrap()).unwrap();
    let (code, out, err) = call(&["pullapart", g0.to_str().unwrap(), "--hnn", gpath.to_str().unwrap(), "--kmax", "3", "--depth", "4"]);
    assert_eq!(code, exit::OK, "{err}");
    let series: Vec<f64> = out.lines().skip(2).map(|l| l.split(',').nth(6).unwrap().parse().unwrap()).collect();
    assert!(series.windows(2).all(|w| w[1] < w[0]), "{series:?}");
}

#[test]
fn book_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "ell_grid = [1.0, 0.1]\ntree_depth = 3\nshadow_eps = 1e-3\n").unwrap();
    let (code, out, err) = call(&["book", "--config", cfg.to_str().unwrap(), "--tree-depth", "2"]);
    assert_eq!(code, exit::OK, "{err}");
    let header = out.lines().next().unwrap();
    assert!(header.contains("\"tree_depth\":2") && header.contains("\"ell_grid\":[1.0,0.1]"), "{header}");
    assert_eq!(out.lines().nth(1), Some("ell,m,q,depth,rho,certified,alpha,box_estimate,r2,n_points"));
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 3);
    let again = call(&["book", "--config", cfg.to_str().unwrap(), "--tree-depth", "2"]).1;
    assert_eq!(out, again);

    std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
    assert_eq!(call(&["book", "--config", cfg.to_str().unwrap()]).0, exit::PARSE);
}

#[test]
fn broken_geodesic_table() {
    let (code, out, _) = call(&["broken-geodesics", "--theta-steps", "2"]);
    assert_eq!(code, exit::OK);
    let rows: Vec<&str> = out.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].ends_with(&format!("{:.12}", 2.0 * 2f64.sqrt().acosh())), "{}", rows[0]);
    assert!(rows[1].ends_with("0.000000000000"));
}
