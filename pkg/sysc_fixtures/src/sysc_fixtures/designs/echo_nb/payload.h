#ifndef PAYLOAD_H
#define PAYLOAD_H

#include <systemc>

struct payload {
    sc_dt::sc_int<32> data_in;
    sc_dt::sc_int<32> data_out;
};

#endif  /* PAYLOAD_H */
