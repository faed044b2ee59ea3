const CAP: usize = 100;

fn swap(v: &mut [i32], a: usize, b: usize) {
    let t = v[a];
    v[a] = v[b];
    v[b] = t;
}

fn bubble_sort(v: &mut [i32], n: usize) {
    for i in 0..n.saturating_sub(1) {
        for j in 0..n - 1 - i {
            if v[j] > v[j + 1] {
                swap(v, j, j + 1);
            }
        }
    }
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    let mut v: Vec<i32> = input.split_whitespace().take(CAP).map(|t| t.parse().unwrap()).collect();
    let n = v.len();
    bubble_sort(&mut v, n);
    let line: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    println!("{}", line.join(" "));
}
