fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        return a;
    }
    gcd(b, a % b)
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    let nums: Vec<i64> = input.split_whitespace().map(|t| t.parse().unwrap()).collect();
    for pair in nums.chunks_exact(2) {
        let (a, b) = (pair[0], pair[1]);
        println!("gcd={} lcm={}", gcd(a, b), lcm(a, b));
    }
}
