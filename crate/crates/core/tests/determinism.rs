use dmanull::config::ExperimentConfig;
use dmanull::experiment::{run_table_nd, run_table_nw};
use dmanull::weights::Pattern;

fn cfg() -> ExperimentConfig {
    let mut c = ExperimentConfig::default();
    c.patterns = vec![Pattern::Cardioid, Pattern::Supercardioid];
    c.orders = vec![1, 2];
    c.bits = vec![16];
    c.runs = 24;
    c.samples = 1024;
    c.grid = 1.0;
    c.depths = vec![-10.0, -30.0];
    c
}

fn tables(c: &ExperimentConfig, threads: usize) -> (String, String) {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
        (run_table_nd(c).unwrap().to_csv(c), run_table_nw(c, &c.depths).unwrap().to_csv(c))
    })
}

#[test]
fn tables_do_not_depend_on_thread_count() {
    let c = cfg();
    let one = tables(&c, 1);
    assert_eq!(one, tables(&c, 3));
    assert_eq!(one, tables(&c, 1));
}

#[test]
fn seed_changes_quantized_cells_only() {
    let a = cfg();
    let mut b = cfg();
    b.seed = 2;
    let ta = run_table_nd(&a).unwrap();
    let tb = run_table_nd(&b).unwrap();
    let unq = ta.columns.len() - 1;
    for (ra, rb) in ta.rows.iter().zip(&tb.rows) {
        assert_eq!(ra.cells[unq], rb.cells[unq]);
        assert_ne!(ra.cells[0], rb.cells[0]);
    }
}
