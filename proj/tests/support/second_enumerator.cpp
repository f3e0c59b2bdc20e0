#include "support/second_enumerator.hpp"
namespace lain::testsupport {
double enumerate_min_delay(const Snapshot& s) { (void)s; return 0.0; }
}
