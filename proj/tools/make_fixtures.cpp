// Regenerates the committed model fixtures under models/ (or a directory
// given as argv[1]). Each file is the deterministic emit of a generator, so
// running this twice produces identical bytes.

#include <symdp/bench.hpp>
#include <symdp/parser.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

namespace {

void write(const std::filesystem::path& dir, const std::string& name,
           const std::string& bytes) {
  std::filesystem::path path = dir / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "cannot write " << path << "\n";
    std::exit(1);
  }
  out << bytes;
  std::cout << path.string() << "\n";
}

} // namespace

int main(int argc, char** argv) {
  using namespace symdp;
  std::filesystem::path dir = argc > 1 ? argv[1] : "models";
  std::filesystem::create_directories(dir);

  {
    DiagramStore s;
    write(dir, "factory_mini.mdp", emit_mdp(s, gen_factory_mini(s)));
  }
  {
    DiagramStore s;
    write(dir, "expon_06.mdp", emit_mdp(s, gen_expon(s, 6)));
  }
  {
    DiagramStore s;
    write(dir, "linear_08.mdp", emit_mdp(s, gen_linear(s, 8)));
  }
  {
    DiagramStore s;
    write(dir, "random_8v3a_s1.mdp", emit_mdp(s, gen_random(s, 8, 3, 1)));
  }
  return 0;
}
