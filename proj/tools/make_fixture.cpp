// Writes the synthetic NSL-KDD-format fixture files used by the test suite.
//   make_fixture <out_dir>

#include <filesystem>
#include <iostream>

#include "scgnet/io.hpp"
#include "scgnet/synthetic.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixture <out_dir>\n";
    return 1;
  }
  const std::filesystem::path dir = argv[1];
  scgnet::synth::Options train;
  train.rows = 500;
  train.seed = 20240101;
  scgnet::synth::Options test;
  test.rows = 200;
  test.seed = 20240102;
  test.first_line_kdd = false;
  test.cover_categories = false;
  test.test_only_fraction = 0.3;
  try {
    scgnet::io::write_text(dir / "kdd_fixture_train.txt", scgnet::synth::generate_text(train));
    scgnet::io::write_text(dir / "kdd_fixture_test.txt", scgnet::synth::generate_text(test));
  } catch (const std::exception& e) {
    std::cerr << "make_fixture: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
