fn main() {
    for (i, seed) in pathfield::corpus::RANDOM_SEEDS.iter().enumerate() {
        std::fs::write(format!("corpus/rand-{i}.fn"), pathfield::corpus::random_function(*seed)).unwrap();
    }
}
