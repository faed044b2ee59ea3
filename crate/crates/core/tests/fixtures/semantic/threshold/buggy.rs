use std::io::Read;

fn classify(x: i32) -> i32 {
    if x > 10 {
        return 1;
    }
    0
}

fn main() {
    let mut input = String::new();
    std::io::stdin().read_to_string(&mut input).unwrap();
    let mut it = input.split_whitespace().map(|t| t.parse::<i32>().unwrap());
    let n = match it.next() {
        Some(n) => n,
        None => std::process::exit(1),
    };
    let mut total = 0;
    for _ in 0..n {
        let x = match it.next() {
            Some(x) => x,
            None => std::process::exit(1),
        };
        let c = classify(x);
        total += c;
        println!("{} {}", x, if c != 0 { "big" } else { "small" });
    }
    println!("big count {}", total);
}
