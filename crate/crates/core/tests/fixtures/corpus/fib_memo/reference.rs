const MAX_N: i32 = 90;

static mut MEMO: [i64; (MAX_N + 1) as usize] = [0; (MAX_N + 1) as usize];

fn fib(n: i32) -> i64 {
    if n < 2 {
        return n as i64;
    }
    unsafe {
        if MEMO[n as usize] != 0 {
            return MEMO[n as usize];
        }
    }
    let v = fib(n - 1) + fib(n - 2);
    unsafe {
        MEMO[n as usize] = v;
    }
    v
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    for t in input.split_whitespace() {
        let n: i32 = t.parse().unwrap();
        if !(0..=MAX_N).contains(&n) {
            println!("out of range");
            continue;
        }
        println!("fib({}) = {}", n, fib(n));
    }
}
