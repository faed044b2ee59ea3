const LIMIT: usize = 10000;

static mut COMPOSITE: [bool; LIMIT + 1] = [false; LIMIT + 1];

fn sieve(n: usize) {
    unsafe {
        for c in COMPOSITE.iter_mut() {
            *c = false;
        }
        COMPOSITE[0] = true;
        COMPOSITE[1] = true;
        let mut i = 2;
        while i * i <= n {
            if !COMPOSITE[i] {
                let mut j = i * i;
                while j <= n {
                    COMPOSITE[j] = true;
                    j += i;
                }
            }
            i += 1;
        }
    }
}

fn count_primes(n: usize) -> i32 {
    let mut c = 0;
    for i in 2..=n {
        if unsafe { !COMPOSITE[i] } {
            c += 1;
        }
    }
    c
}

fn largest_prime(n: usize) -> i32 {
    for i in (2..=n).rev() {
        if unsafe { !COMPOSITE[i] } {
            return i as i32;
        }
    }
    -1
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    for t in input.split_whitespace() {
        let n: i64 = t.parse().unwrap();
        if n < 2 || n > LIMIT as i64 {
            println!("{}: none", n);
            continue;
        }
        let n = n as usize;
        sieve(n);
        println!("{}: {} primes, largest {}", n, count_primes(n), largest_prime(n));
    }
}
