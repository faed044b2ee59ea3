const MAX_DEPTH: usize = 64;

static mut STACK: [i64; MAX_DEPTH] = [0; MAX_DEPTH];
static mut TOP: usize = 0;

fn push(v: i64) {
    unsafe {
        if TOP < MAX_DEPTH {
            STACK[TOP] = v;
            TOP += 1;
        }
    }
}

fn pop() -> i64 {
    unsafe {
        if TOP == 0 {
            return 0;
        }
        TOP -= 1;
        STACK[TOP]
    }
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    for tok in input.split_whitespace() {
        match tok {
            "+" | "-" | "*" => {
                let b = pop();
                let a = pop();
                push(match tok {
                    "+" => a + b,
                    "-" => a - b,
                    _ => a * b,
                });
            }
            "=" => println!("{}", pop()),
            _ => push(tok.parse().unwrap_or(0)),
        }
    }
    println!("depth {}", unsafe { TOP });
}
