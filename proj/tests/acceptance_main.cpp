// Runs the full verification matrix and reports one line per criterion.
#include <iostream>

#include "ghoststat/verify.hpp"

int main() {
    ghoststat::VerifyOptions opt;
    opt.threads = 0; // all cores
    opt.progress = &std::cerr;
    const auto results = ghoststat::run_verification(opt);
    ghoststat::print_results(std::cout, results);
    return ghoststat::all_passed(results) ? 0 : 1;
}
