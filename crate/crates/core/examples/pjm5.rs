use gridsec::grid::{cost_vector, GridCase};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "../../data/pjm5.toml".into());
    let case = GridCase::load(path).unwrap();
    let cv = cost_vector(&case).unwrap();
    println!("V0 = {:.4}", cv.base.value);
    println!("gen = {:?}", cv.base.generation);
    println!("flows = {:?}", cv.base.flows);
    for c in &cv.contingencies {
        println!("{} V = {:.4} f = {:.2}", c.line, c.outage_value, c.cost);
    }
}
