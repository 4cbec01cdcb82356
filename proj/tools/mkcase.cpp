// Writes the bundled two-area demo case to a file.

#include <CLI11.hpp>
#include <iostream>

#include "gridred/demo_case.hpp"

int main(int argc, char** argv) {
  CLI::App app{"gridred-mkcase: write the synthetic two-area demo case"};
  std::string out = "twoarea.grid";
  int ties = 2;
  app.add_option("-o,--out", out, "output case file")->capture_default_str();
  app.add_option("--ties", ties, "number of tie-lines (2 or 3)")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const gridred::PowerCase c = gridred::make_twoarea_case(ties);
    gridred::save_case(c, out);
    std::cout << "wrote " << out << " (" << c.buses.size() << " buses, " << c.machines.size()
              << " machines, " << c.partition.tie_lines.size() << " tie-lines)\n";
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
  return 0;
}
