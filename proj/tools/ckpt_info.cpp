// Prints a checkpoint's metadata and parameter shapes.

#include <iostream>

#include "treesmu/checkpoint.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: ckpt_info <file.ckpt>\n";
    return 2;
  }
  try {
    const auto ckpt = treesmu::ad::load_checkpoint(argv[1]);
    std::cout << ckpt.metadata.dump(2) << "\n";
    std::size_t total = 0;
    for (std::uint32_t i = 0; i < ckpt.params.size(); ++i) {
      const treesmu::ad::ParamId id{i};
      const auto& v = ckpt.params.value(id);
      std::cout << ckpt.params.key(id) << " " << v.rows() << "x" << v.cols() << "\n";
      total += v.size();
    }
    std::cout << "parameters: " << total << ", adam step " << ckpt.params.step() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
