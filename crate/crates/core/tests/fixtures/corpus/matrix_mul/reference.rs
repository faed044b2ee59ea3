const N: usize = 3;

fn read_matrix(it: &mut std::str::SplitWhitespace<'_>, m: &mut [[i32; N]; N]) {
    for row in m.iter_mut() {
        for cell in row.iter_mut() {
            *cell = it.next().and_then(|t| t.parse().ok()).unwrap_or(0);
        }
    }
}

fn multiply(a: &[[i32; N]; N], b: &[[i32; N]; N], c: &mut [[i32; N]; N]) {
    for i in 0..N {
        for j in 0..N {
            let mut s = 0;
            for k in 0..N {
                s += a[i][k] * b[k][j];
            }
            c[i][j] = s;
        }
    }
}

fn trace(m: &[[i32; N]; N]) -> i32 {
    let mut t = 0;
    for (i, row) in m.iter().enumerate() {
        t += row[i];
    }
    t
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    let mut it = input.split_whitespace();
    let mut a = [[0; N]; N];
    let mut b = [[0; N]; N];
    let mut c = [[0; N]; N];
    read_matrix(&mut it, &mut a);
    read_matrix(&mut it, &mut b);
    multiply(&a, &b, &mut c);
    for row in &c {
        println!("{} {} {}", row[0], row[1], row[2]);
    }
    println!("trace {}", trace(&c));
}
