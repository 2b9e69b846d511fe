#pragma once

#include <vector>

namespace fedmua {

// One labeled feature vector.
struct Example {
    std::vector<double> features;
    int label = 0;

    bool operator==(const Example& o) const { return label == o.label && features == o.features; }
};

using Batch = std::vector<Example>;

}  // namespace fedmua
