/* Frees a pointer that was advanced past the start of its heap buffer. */
#include "std_testcase.h"

#define SOURCE "Fixed String"

void CWE761_Free_Pointer_Not_at_Start_of_Buffer__char_fixed_string_01_bad(void)
{
    char *data = (char *)malloc(100 * sizeof(char));
    if (data == NULL) {exit(-1);}
    strcpy(data, SOURCE);
    data += 10;
    printLine(data);
    free(data);
}

int main(void)
{
    printLine("Calling bad()...");
    CWE761_Free_Pointer_Not_at_Start_of_Buffer__char_fixed_string_01_bad();
    printLine("Finished bad()");
    return 0;
}
