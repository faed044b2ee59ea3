fn is_even(n: i32) -> i32 {
    if n == 0 {
        return 1;
    }
    is_odd(n - 1)
}

fn is_odd(n: i32) -> i32 {
    if n == 0 {
        return 0;
    }
    is_even(n - 1)
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    for t in input.split_whitespace() {
        let mut n: i32 = t.parse().unwrap();
        if n < 0 {
            n = -n;
        }
        println!("{} is {}", n, if is_even(n) != 0 { "even" } else { "odd" });
    }
}
