fn main() {
    // placeholder while the library crates come up
}
