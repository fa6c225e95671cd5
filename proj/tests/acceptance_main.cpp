#include <prefillsim/acceptance.hpp>

int main() { return prefillsim::acceptance_main(); }
