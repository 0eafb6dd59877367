use std::time::Instant;
use teamltl::propgen::run_suite;

#[test]
fn find_slow_kp() {
    for t in 0..300u64 {
        let base = 42u64.wrapping_add(t.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let start = Instant::now();
        let _ = run_suite("kpipeline", 1, base).unwrap();
        let d = start.elapsed();
        if d.as_millis() > 2000 {
            eprintln!("trial {t}: {:?}", d);
        }
    }
}
