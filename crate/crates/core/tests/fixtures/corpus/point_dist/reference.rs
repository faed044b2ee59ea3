#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Point {
    x: f64,
    y: f64,
}

fn distance(a: Point, b: Point) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    (dx * dx + dy * dy).sqrt()
}

fn midpoint(a: Point, b: Point) -> Point {
    Point {
        x: (a.x + b.x) / 2.0,
        y: (a.y + b.y) / 2.0,
    }
}

fn main() {
    let input = std::io::read_to_string(std::io::stdin()).unwrap();
    let v: Vec<f64> = input.split_whitespace().map(|t| t.parse().unwrap()).collect();
    for c in v.chunks_exact(4) {
        let a = Point { x: c[0], y: c[1] };
        let b = Point { x: c[2], y: c[3] };
        let m = midpoint(a, b);
        println!("{:.3} ({:.2}, {:.2})", distance(a, b), m.x, m.y);
    }
}
