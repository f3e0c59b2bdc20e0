#pragma once
#include "lainsim/oracle.hpp"
namespace lain::testsupport {
double enumerate_min_delay(const Snapshot& s);
}
