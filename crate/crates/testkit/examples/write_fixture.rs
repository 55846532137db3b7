//! Writes a synthetic fixture: `write_fixture <dir> [images] [seed]`.

use capeval_testkit::fixture::{write_fixture, FixtureSpec};

fn main() {
    let mut args = std::env::args().skip(1);
    let dir = std::path::PathBuf::from(
        args.next()
            .expect("usage: write_fixture <dir> [images] [seed]"),
    );
    let images = args.next().map_or(50, |s| s.parse().expect("images"));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    std::fs::create_dir_all(&dir).unwrap();
    let spec = FixtureSpec::new(
        images,
        &[("model-a", 0.1), ("model-b", 0.4), ("model-c", 0.7)],
        seed,
    );
    let paths = write_fixture(&dir, &spec).unwrap();
    println!("{}", paths.eval_args().join(" "));
}
